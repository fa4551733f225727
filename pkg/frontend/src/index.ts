import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { mountSessionView } from "./view.js";

export { ApiClient, ApiError } from "./api.js";
export { COMMANDS, SessionController } from "./controller.js";
export type { Message, ViewState } from "./controller.js";
export { mountSessionView } from "./view.js";

// Browser bootstrap: ?service=... points at the chat API, ?session=...
// resumes an existing session, ?photos=a,b,c starts a new one.
export async function boot(root: HTMLElement): Promise<SessionController> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "http://127.0.0.1:8023";
  const controller = new SessionController(new ApiClient(base));
  mountSessionView(root, controller);

  const existing = params.get("session");
  if (existing) {
    await controller.reload(existing);
  } else {
    const photos = (params.get("photos") ?? "").split(",").filter(Boolean);
    if (photos.length) await controller.start(photos);
  }
  return controller;
}
