// DOM rendering for the session view: photo card, message bubbles,
// command buttons, answer box, retry banner.

import { COMMANDS, SessionController, ViewState } from "./controller.js";

export function mountSessionView(
  root: HTMLElement,
  controller: SessionController,
): void {
  root.innerHTML = `
    <div class="photo-card" data-role="photo"></div>
    <ul class="messages" data-role="messages"></ul>
    <div class="banner" data-role="banner" hidden>
      <span data-role="banner-text"></span>
      <button data-role="retry">retry</button>
    </div>
    <div class="controls">
      ${COMMANDS.map(
        (cmd) => `<button data-command="${cmd}">${cmd}</button>`,
      ).join("")}
      <input data-role="answer" placeholder="type your answer" />
      <button data-role="send">send</button>
    </div>`;

  const messages = root.querySelector('[data-role="messages"]')!;
  const photo = root.querySelector('[data-role="photo"]')!;
  const banner = root.querySelector('[data-role="banner"]') as HTMLElement;
  const bannerText = root.querySelector('[data-role="banner-text"]')!;
  const answer = root.querySelector('[data-role="answer"]') as HTMLInputElement;

  for (const button of root.querySelectorAll<HTMLButtonElement>(
    "[data-command]",
  )) {
    button.addEventListener("click", () => {
      void controller.sendCommand(button.dataset.command as string);
    });
  }
  root
    .querySelector('[data-role="retry"]')!
    .addEventListener("click", () => void controller.retry());

  const submit = () => {
    const text = answer.value.trim();
    if (!text) return;
    answer.value = "";
    // typed slash-commands work like the buttons
    if (text.startsWith("/")) void controller.sendCommand(text);
    else void controller.sendAnswer(text);
  };
  root
    .querySelector('[data-role="send"]')!
    .addEventListener("click", submit);
  answer.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") submit();
  });

  controller.subscribe((state: ViewState) => {
    photo.textContent = state.currentPhotoId
      ? `photo: ${state.currentPhotoId}`
      : "";
    messages.innerHTML = "";
    for (const message of state.messages) {
      const item = document.createElement("li");
      item.className = `bubble ${message.role} ${message.kind}`;
      item.textContent =
        message.kind === "show_photo"
          ? `[photo ${message.photoId}]`
          : message.text;
      messages.appendChild(item);
    }
    banner.hidden = state.error === null && !state.ended;
    bannerText.textContent = state.ended
      ? "session ended - thank you"
      : state.error ?? "";
    const locked = !state.inputEnabled || state.ended;
    answer.disabled = locked;
    for (const button of root.querySelectorAll("button")) {
      if (button.dataset.role !== "retry") button.disabled = locked;
    }
  });
}
