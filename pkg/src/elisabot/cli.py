"""Command line interface: training, evaluation, question generation,
a local terminal chat loop, and the HTTP service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click


@click.group()
def main():
    """Reminiscence-therapy dialogue engine."""


def _load_grids(records, dataset_path):
    from .data import load_feature_grid
    base = Path(dataset_path).parent
    return {r.image_id: load_feature_grid(base / r.features)
            for r in records}


@main.command("train-vqg")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(),
              help="Checkpoint output path.")
@click.option("--annotation-dim", default=2048, show_default=True)
@click.option("--attention-dim", default=512, show_default=True)
@click.option("--embedding-dim", default=512, show_default=True)
@click.option("--lstm-dim", default=512, show_default=True)
@click.option("--dropout", default=0.5, show_default=True)
@click.option("--min-count", default=3, show_default=True)
@click.option("--steps", default=1000, show_default=True)
@click.option("--batch-size", default=64, show_default=True)
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--target-loss", default=None, type=float,
              help="Stop early when the batch loss drops below this.")
@click.option("--log-every", default=50, show_default=True)
def train_vqg(dataset, out, annotation_dim, attention_dim, embedding_dim,
              lstm_dim, dropout, min_count, steps, batch_size, lr, seed,
              target_loss, log_every):
    """Train the visual question generator on an image-question dataset."""
    from .data import load_question_dataset
    from .training import TrainConfig, save_vqg, train_vqg_model
    from .vqg import VqgConfig
    records = load_question_dataset(dataset)
    grids = _load_grids(records, dataset)
    config = VqgConfig(annotation_dim=annotation_dim,
                       attention_dim=attention_dim,
                       embedding_dim=embedding_dim, lstm_dim=lstm_dim,
                       dropout=dropout)
    train_cfg = TrainConfig(batch_size=batch_size, max_steps=steps, lr=lr,
                            seed=seed, target_loss=target_loss,
                            log_every=log_every)
    params, vocab, curve = train_vqg_model(
        records, grids, config, train_cfg, min_count=min_count,
        use_dropout=dropout > 0)
    save_vqg(out, params, vocab)
    click.echo("trained %d steps, final loss %.4f, vocabulary %d, saved %s"
               % (len(curve), curve[-1], len(vocab), out))


@main.command("train-chatbot")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--fine-tune", "fine_tune_from", type=click.Path(exists=True),
              default=None,
              help="Continue training from this checkpoint with its "
                   "vocabulary frozen (second-corpus phase).")
@click.option("--hidden-dim", default=500, show_default=True)
@click.option("--embedding-dim", default=500, show_default=True)
@click.option("--dropout", default=0.25, show_default=True)
@click.option("--min-count", default=3, show_default=True)
@click.option("--steps", default=1000, show_default=True)
@click.option("--batch-size", default=64, show_default=True)
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--target-loss", default=None, type=float)
@click.option("--log-every", default=50, show_default=True)
def train_chatbot(dataset, out, fine_tune_from, hidden_dim, embedding_dim,
                  dropout, min_count, steps, batch_size, lr, seed,
                  target_loss, log_every):
    """Train (or fine-tune) the feedback chatbot on a dialogue-pair corpus."""
    from .chatbot import ChatbotConfig
    from .data import load_dialogue_pairs
    from .training import (TrainConfig, fine_tune_chatbot, load_chatbot,
                           save_chatbot, train_chatbot_model)
    pairs = load_dialogue_pairs(dataset)
    train_cfg = TrainConfig(batch_size=batch_size, max_steps=steps, lr=lr,
                            seed=seed, target_loss=target_loss,
                            log_every=log_every)
    if fine_tune_from:
        params, vocab = load_chatbot(fine_tune_from)
        curve = fine_tune_chatbot(params, vocab, pairs, train_cfg,
                                  use_dropout=dropout > 0)
    else:
        config = ChatbotConfig(hidden_dim=hidden_dim,
                               embedding_dim=embedding_dim, dropout=dropout)
        params, vocab, curve = train_chatbot_model(
            pairs, config, train_cfg, min_count=min_count,
            use_dropout=dropout > 0)
    save_chatbot(out, params, vocab)
    click.echo("trained %d steps, final loss %.4f, vocabulary %d, saved %s"
               % (len(curve), curve[-1], len(vocab), out))


@main.command("eval-bleu")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--dataset", required=True, type=click.Path(exists=True))
def eval_bleu(checkpoint, dataset):
    """Score the generator's top questions against the references."""
    from .bleu import corpus_bleu
    from .data import load_question_dataset
    from .training import load_vqg
    from .vocab import tokenize
    from .vqg import beam_search
    params, vocab = load_vqg(checkpoint)
    records = load_question_dataset(dataset)
    grids = _load_grids(records, dataset)
    candidates, reference_sets = [], []
    for r in records:
        questions = beam_search(grids[r.image_id], params, vocab)
        top = questions[0] if questions else ""
        candidates.append(tokenize(top))
        reference_sets.append([tokenize(q) for q in r.questions])
    report = corpus_bleu(candidates, reference_sets)
    click.echo(json.dumps(report.as_dict(), indent=2))


@main.command("gen-questions")
@click.option("--checkpoint", required=True, type=click.Path(exists=True))
@click.option("--features", required=True, type=click.Path(exists=True),
              help="Feature-grid file for one photo.")
def gen_questions(checkpoint, features):
    """Print ranked questions for one photo's feature grid."""
    from .data import load_feature_grid
    from .training import load_vqg
    from .vqg import beam_search
    params, vocab = load_vqg(checkpoint)
    grid = load_feature_grid(features)
    for rank, q in enumerate(beam_search(grid, params, vocab), start=1):
        click.echo("%d. %s" % (rank, q))


@main.command("chat")
@click.option("--vqg-checkpoint", required=True,
              type=click.Path(exists=True))
@click.option("--chatbot-checkpoint", required=True,
              type=click.Path(exists=True))
@click.option("--photos", "photos_dir", required=True,
              type=click.Path(exists=True),
              help="Directory of .feat feature-grid files.")
@click.option("--seed", default=0, show_default=True)
def chat(vqg_checkpoint, chatbot_checkpoint, photos_dir, seed):
    """Run a session in the terminal (commands: /start /yes /change /exit)."""
    from .dialogue import Event, NeuralSessionModels, Photo, Session
    from .training import load_chatbot, load_vqg
    vqg_params, vqg_vocab = load_vqg(vqg_checkpoint)
    cb_params, cb_vocab = load_chatbot(chatbot_checkpoint)
    models = NeuralSessionModels(vqg_params, vqg_vocab, cb_params, cb_vocab)
    photos = [Photo(photo_id=p.stem, path=str(p))
              for p in sorted(Path(photos_dir).glob("*.feat"))]
    if not photos:
        raise click.ClickException("no .feat files in %s" % photos_dir)
    session = Session(photos, seed=seed, models=models)
    click.echo("type /start to begin, /exit to leave")
    while session.state != "Ended":
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            continue
        kind = "command" if line.startswith("/") else "user_text"
        for action in session.handle_event(Event(kind=kind, payload=line)):
            if action.kind == "show_photo":
                click.echo("[photo %s]" % action.photo_id)
            else:
                click.echo("bot: %s" % (action.text,))


@main.command("serve")
@click.option("--host", default=None, envvar="ELISA_HOST")
@click.option("--port", default=None, type=int, envvar="ELISA_PORT")
@click.option("--vqg-checkpoint", default=None,
              envvar="ELISA_VQG_CHECKPOINT")
@click.option("--chatbot-checkpoint", default=None,
              envvar="ELISA_CHATBOT_CHECKPOINT")
@click.option("--photos-dir", default=None, envvar="ELISA_PHOTOS_DIR")
@click.option("--transcripts-dir", default=None,
              envvar="ELISA_TRANSCRIPTS_DIR")
@click.option("--idle-timeout", default=None, type=float,
              envvar="ELISA_IDLE_TIMEOUT")
def serve(host, port, vqg_checkpoint, chatbot_checkpoint, photos_dir,
          transcripts_dir, idle_timeout):
    """Run the HTTP chat service."""
    import uvicorn

    from .service import ServiceConfig, create_app, load_models
    from .training import CheckpointError
    config = ServiceConfig.from_env(
        host=host, port=port, vqg_checkpoint=vqg_checkpoint,
        chatbot_checkpoint=chatbot_checkpoint, photos_dir=photos_dir,
        transcripts_dir=transcripts_dir, idle_timeout=idle_timeout)
    if not config.vqg_checkpoint or not config.chatbot_checkpoint:
        raise click.ClickException("both --vqg-checkpoint and "
                                   "--chatbot-checkpoint are required")
    try:
        models = load_models(config)
    except CheckpointError as e:
        click.echo("checkpoint error: %s" % e, err=True)
        sys.exit(1)
    app = create_app(config, models=models)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


if __name__ == "__main__":
    main()
