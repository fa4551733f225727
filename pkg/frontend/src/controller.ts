// Session view-model. Owns the message list and input state, maps user
// actions to API events (exactly one request per action), and keeps the
// rendered sequence prefix-consistent with the server transcript.

import { ApiClient, ApiError, BotAction, TranscriptEntry } from "./api.js";

export interface Message {
  role: "user" | "bot";
  kind: string;
  text: string;
  photoId: string | null;
  turn: number;
}

export interface ViewState {
  sessionId: string | null;
  messages: Message[];
  currentPhotoId: string | null;
  inputEnabled: boolean;
  ended: boolean;
  /** Retry banner text; null when the last request succeeded. */
  error: string | null;
}

export const COMMANDS = ["/yes", "/change", "/exit"] as const;

type PendingEvent = { kind: "command" | "user_text"; payload: string };

export class SessionController {
  private state: ViewState = {
    sessionId: null,
    messages: [],
    currentPhotoId: null,
    inputEnabled: false,
    ended: false,
    error: null,
  };
  private pending: PendingEvent | null = null;
  private inFlight: Promise<void> = Promise.resolve();
  private listeners: Array<(state: ViewState) => void> = [];

  constructor(private readonly api: ApiClient) {}

  getState(): ViewState {
    return {
      ...this.state,
      messages: [...this.state.messages],
    };
  }

  subscribe(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const snapshot = this.getState();
    for (const listener of this.listeners) listener(snapshot);
  }

  /** Create a session, upload any feature files, and send /start. */
  async start(
    photoIds: string[],
    features: Map<string, Uint8Array> = new Map(),
    seed?: number,
  ): Promise<void> {
    const handle = await this.api.createSession(photoIds, seed);
    this.state.sessionId = handle.session_id;
    for (const [photoId, data] of features) {
      await this.api.uploadPhoto(handle.session_id, data, photoId);
    }
    this.state.inputEnabled = true;
    this.emit();
    await this.sendCommand("/start");
  }

  /** Rebuild the full view from the server transcript (page reload). */
  async reload(sessionId: string): Promise<void> {
    const entries = await this.api.getTranscript(sessionId);
    this.state = {
      sessionId,
      messages: entries.map((entry) => this.fromTranscript(entry)),
      currentPhotoId: this.lastPhoto(entries),
      inputEnabled: !this.hasEnded(entries),
      ended: this.hasEnded(entries),
      error: null,
    };
    this.emit();
  }

  sendCommand(command: string): Promise<void> {
    return this.dispatch({ kind: "command", payload: command });
  }

  sendAnswer(text: string): Promise<void> {
    return this.dispatch({ kind: "user_text", payload: text });
  }

  /** Re-send the event that hit a network failure. */
  retry(): Promise<void> {
    const pending = this.pending;
    if (!pending) return Promise.resolve();
    this.pending = null;
    this.state.error = null;
    return this.dispatch(pending, true);
  }

  private dispatch(event: PendingEvent, isRetry = false): Promise<void> {
    if (this.state.ended || this.state.sessionId === null) {
      return Promise.resolve();
    }
    // serialize: at most one in-flight event request per session view
    this.inFlight = this.inFlight.then(() => this.send(event, isRetry));
    return this.inFlight;
  }

  private async send(event: PendingEvent, isRetry: boolean): Promise<void> {
    if (this.state.ended) return;
    if (!isRetry) {
      this.state.messages.push({
        role: "user",
        kind: event.kind,
        text: event.payload,
        photoId: null,
        turn: this.state.messages.length,
      });
      this.emit();
    }
    try {
      const actions = await this.api.sendEvent(
        this.state.sessionId as string,
        event.kind,
        event.payload,
      );
      this.state.error = null;
      for (const action of actions) this.apply(action);
    } catch (error) {
      if (error instanceof ApiError && error.code === "session-ended") {
        this.state.ended = true;
        this.state.inputEnabled = false;
      } else {
        // keep the message and offer a retry; nothing is dropped silently
        this.pending = event;
        this.state.error =
          error instanceof Error ? error.message : String(error);
      }
    }
    this.emit();
  }

  private apply(action: BotAction): void {
    if (action.kind === "show_photo") {
      this.state.currentPhotoId = action.photo_id;
    }
    if (action.kind === "end_session") {
      this.state.ended = true;
      this.state.inputEnabled = false;
    }
    this.state.messages.push({
      role: "bot",
      kind: action.kind,
      text: action.text ?? "",
      photoId: action.photo_id,
      turn: this.state.messages.length,
    });
  }

  private fromTranscript(entry: TranscriptEntry): Message {
    const isPhoto = entry.kind === "show_photo";
    return {
      role: entry.role,
      kind: entry.kind,
      text: isPhoto ? "" : String(entry.payload ?? ""),
      photoId: isPhoto ? String(entry.payload) : null,
      turn: entry.turn,
    };
  }

  private lastPhoto(entries: TranscriptEntry[]): string | null {
    for (let i = entries.length - 1; i >= 0; i--) {
      if (entries[i].kind === "show_photo") return String(entries[i].payload);
    }
    return null;
  }

  private hasEnded(entries: TranscriptEntry[]): boolean {
    return entries.some((entry) => entry.kind === "end_session");
  }
}
