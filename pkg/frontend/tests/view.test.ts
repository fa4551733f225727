// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { mountSessionView } from "../src/view.js";
import { MockService } from "./mock_service.js";

let service: MockService;
let controller: SessionController;
let root: HTMLElement;

function click(selector: string): void {
  (root.querySelector(selector) as HTMLButtonElement).click();
}

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 10));
}

beforeEach(async () => {
  service = new MockService();
  controller = new SessionController(
    new ApiClient("http://test", service.fetch),
  );
  root = document.createElement("div");
  document.body.appendChild(root);
  mountSessionView(root, controller);
  await controller.start(["p1", "p2"]);
});

describe("session view", () => {
  it("renders command buttons for /yes /change /exit", () => {
    for (const cmd of ["/yes", "/change", "/exit"]) {
      expect(root.querySelector(`[data-command="${cmd}"]`)).not.toBeNull();
    }
  });

  it("button clicks emit the matching command event", async () => {
    const before = service.requests.length;
    click('[data-command="/yes"]');
    await flush();
    const sent = service.requests.slice(before);
    expect(sent).toHaveLength(1);
    expect(sent[0].body).toEqual({ kind: "command", payload: "/yes" });
  });

  it("the answer box sends user_text and clears itself", async () => {
    click('[data-command="/yes"]');
    await flush();
    const input = root.querySelector(
      '[data-role="answer"]',
    ) as HTMLInputElement;
    input.value = "by the lake";
    click('[data-role="send"]');
    await flush();
    expect(input.value).toBe("");
    expect(service.requests.at(-1)?.body).toEqual({
      kind: "user_text",
      payload: "by the lake",
    });
  });

  it("typed slash-commands go out as commands", async () => {
    const input = root.querySelector(
      '[data-role="answer"]',
    ) as HTMLInputElement;
    input.value = "/change";
    click('[data-role="send"]');
    await flush();
    expect(service.requests.at(-1)?.body).toEqual({
      kind: "command",
      payload: "/change",
    });
  });

  it("renders bot bubbles in transcript order", async () => {
    click('[data-command="/yes"]');
    await flush();
    const bubbles = [...root.querySelectorAll(".bubble")].map(
      (node) => node.className,
    );
    expect(bubbles[0]).toContain("user");
    expect(bubbles.at(-1)).toContain("ask_question");
  });

  it("shows the current photo card", () => {
    const photo = root.querySelector('[data-role="photo"]')!;
    expect(photo.textContent).toBe("photo: p1");
  });

  it("pressing /exit shows the end banner and disables input", async () => {
    click('[data-command="/exit"]');
    await flush();
    const banner = root.querySelector('[data-role="banner"]') as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(
      root.querySelector('[data-role="banner-text"]')!.textContent,
    ).toContain("session ended");
    const input = root.querySelector(
      '[data-role="answer"]',
    ) as HTMLInputElement;
    expect(input.disabled).toBe(true);
    for (const cmd of ["/yes", "/change", "/exit"]) {
      const button = root.querySelector(
        `[data-command="${cmd}"]`,
      ) as HTMLButtonElement;
      expect(button.disabled).toBe(true);
    }
  });

  it("network failure shows the retry banner and retry recovers", async () => {
    service.failNext = true;
    click('[data-command="/yes"]');
    await flush();
    const banner = root.querySelector('[data-role="banner"]') as HTMLElement;
    expect(banner.hidden).toBe(false);

    click('[data-role="retry"]');
    await flush();
    expect(banner.hidden).toBe(true);
    expect(controller.getState().error).toBeNull();
  });
});
