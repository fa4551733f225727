"""Session state machine: photo proposal, question cycles, feedback.

A session walks its photos in a seeded random order without replacement.
Each accepted photo gets a question plan from the question generator and a
turn budget drawn uniformly from {4, 5, 6}; every user answer receives a
chatbot feedback comment before the next question.  ``/change`` skips the
current photo, ``/exit`` ends the session, and running out of photos ends
it too.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .data import FeatureGrid, load_feature_grid

COMMANDS = ("/start", "/yes", "/change", "/exit")

AWAITING_PHOTOS = "AwaitingPhotos"
PHOTO_PROPOSED = "PhotoProposed"
AWAITING_ANSWER = "AwaitingAnswer"
ENDED = "Ended"


class SessionEndedError(RuntimeError):
    """An event arrived after the session ended."""


class SessionModels(Protocol):
    def plan_questions(self, grid: FeatureGrid) -> list[str]: ...
    def feedback(self, answer: str) -> str: ...


class NeuralSessionModels:
    """Adapter binding trained checkpoints to the session engine."""

    def __init__(self, vqg_params, vqg_vocab, chatbot_params, chatbot_vocab):
        self.vqg_params = vqg_params
        self.vqg_vocab = vqg_vocab
        self.chatbot_params = chatbot_params
        self.chatbot_vocab = chatbot_vocab

    def plan_questions(self, grid):
        from .vqg import beam_search
        return [q for q in beam_search(grid, self.vqg_params, self.vqg_vocab)
                if q.strip()]

    def feedback(self, answer):
        from .chatbot import reply_to
        return reply_to(answer, self.chatbot_params, self.chatbot_vocab)


@dataclass
class Photo:
    photo_id: str
    grid: FeatureGrid | None = None
    path: str | None = None

    def features(self) -> FeatureGrid:
        if self.grid is None:
            if self.path is None:
                raise FileNotFoundError(
                    "photo %r has no features" % self.photo_id)
            self.grid = load_feature_grid(self.path)
        return self.grid


@dataclass
class Event:
    kind: str                 # command | user_text | add_photo
    payload: object = None
    timestamp: float | None = None


@dataclass
class BotAction:
    kind: str                 # show_photo | ask_question | feedback_comment
    text: str | None = None   # | info_message | end_session
    photo_id: str | None = None


@dataclass
class TranscriptEntry:
    role: str      # user | bot
    kind: str
    payload: object
    turn: int
    timestamp: float


class Session:
    def __init__(self, photos: list[Photo], seed: int,
                 models: SessionModels, session_id: str = "local",
                 clock: Callable[[], float] = time.time):
        if not photos:
            raise ValueError("a session needs at least one photo")
        ids = [p.photo_id for p in photos]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate photo ids")
        self.session_id = session_id
        self.models = models
        self.seed = seed
        self._clock = clock
        self._rng = np.random.Generator(np.random.PCG64(seed))
        by_id = {p.photo_id: p for p in photos}
        order = [ids[i] for i in self._rng.permutation(len(ids))]
        self.queue: list[Photo] = [by_id[i] for i in order]
        self.shown: list[str] = []
        self.current: Photo | None = None
        self.plan: list[str] = []
        self.asked = 0
        self.turn_budget = 0
        self.state = AWAITING_PHOTOS
        self._entries: list[TranscriptEntry] = []

    # -- transcript --------------------------------------------------------

    def transcript(self) -> list[TranscriptEntry]:
        return list(self._entries)

    def _log(self, role, kind, payload):
        self._entries.append(TranscriptEntry(
            role=role, kind=kind, payload=payload,
            turn=len(self._entries), timestamp=self._clock()))

    # -- event handling ----------------------------------------------------

    def handle_event(self, event: Event) -> list[BotAction]:
        if self.state == ENDED:
            raise SessionEndedError("session %s has ended" % self.session_id)
        payload = event.payload
        if isinstance(payload, Photo):  # keep transcripts JSON-serializable
            payload = payload.photo_id
        self._log("user", event.kind, payload)
        actions = self._dispatch(event)
        for a in actions:
            self._log("bot", a.kind, a.photo_id if a.kind == "show_photo"
                      else a.text)
        return actions

    def _dispatch(self, event: Event) -> list[BotAction]:
        if event.kind == "add_photo":
            photo = event.payload
            if any(p.photo_id == photo.photo_id for p in self.queue) \
                    or photo.photo_id in self.shown:
                return [self._info("photo %s is already in this session"
                                   % photo.photo_id)]
            # insert at a seeded random position so late additions join the
            # without-replacement draw
            pos = int(self._rng.integers(0, len(self.queue) + 1))
            self.queue.insert(pos, photo)
            return [self._info("photo %s added" % photo.photo_id)]

        if event.kind == "command":
            return self._on_command(str(event.payload))

        if event.kind == "user_text":
            if self.state == AWAITING_ANSWER:
                return self._on_answer(str(event.payload))
            return [self._info("please use one of: %s"
                               % ", ".join(self._valid_commands()))]

        return [self._info("unknown event kind %r" % event.kind)]

    def _on_command(self, cmd: str) -> list[BotAction]:
        cmd = cmd.lower()
        if cmd == "/exit":
            return self._end()
        if cmd == "/start":
            if self.state != AWAITING_PHOTOS:
                return [self._info("the session is already running")]
            return self._propose_next()
        if cmd == "/yes":
            if self.state != PHOTO_PROPOSED:
                return [self._info("there is no proposed photo to accept; "
                                   "valid commands: %s"
                                   % ", ".join(self._valid_commands()))]
            return self._accept_photo()
        if cmd == "/change":
            if self.state != PHOTO_PROPOSED:
                return [self._info("there is no proposed photo to change; "
                                   "valid commands: %s"
                                   % ", ".join(self._valid_commands()))]
            return self._propose_next()
        return [self._info("unknown command %r; valid commands: %s"
                           % (cmd, ", ".join(COMMANDS)))]

    def _on_answer(self, text: str) -> list[BotAction]:
        comment = self.models.feedback(text)
        actions = [BotAction("feedback_comment", text=comment)]
        actions.extend(self._next_question_or_photo())
        return actions

    # -- transitions -------------------------------------------------------

    def _valid_commands(self):
        if self.state == AWAITING_PHOTOS:
            return ("/start", "/exit")
        if self.state == PHOTO_PROPOSED:
            return ("/yes", "/change", "/exit")
        return ("/exit",)

    def _info(self, text):
        return BotAction("info_message", text=text)

    def force_end(self, reason: str) -> None:
        """End the session from outside the event flow (idle timeout)."""
        if self.state == ENDED:
            return
        self.state = ENDED
        self.current = None
        self._log("bot", "end_session", reason)

    def _end(self) -> list[BotAction]:
        self.state = ENDED
        self.current = None
        return [BotAction("end_session",
                          text="thank you for sharing your memories")]

    def _propose_next(self) -> list[BotAction]:
        if not self.queue:
            return self._end()
        self.current = self.queue.pop(0)
        self.shown.append(self.current.photo_id)
        self.state = PHOTO_PROPOSED
        return [
            BotAction("show_photo", photo_id=self.current.photo_id),
            self._info("shall we talk about this photo? "
                       "/yes to accept, /change for another"),
        ]

    def _accept_photo(self) -> list[BotAction]:
        self.plan = self.models.plan_questions(self.current.features())
        self.turn_budget = int(self._rng.integers(4, 7))
        self.asked = 0
        return self._next_question_or_photo()

    def _next_question_or_photo(self) -> list[BotAction]:
        if self.asked < self.turn_budget and self.asked < len(self.plan):
            question = self.plan[self.asked]
            self.asked += 1
            self.state = AWAITING_ANSWER
            return [BotAction("ask_question", text=question)]
        return self._propose_next()
