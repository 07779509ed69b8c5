/** DOM-level kiosk tests against the scripted gateway double. */

import { beforeEach, describe, expect, it } from "vitest";

import { GALLERY } from "../src/gallery.js";
import { Kiosk } from "../src/kiosk.js";
import { FakeGateway } from "./fake_gateway.js";

const bottle = GALLERY.find((item) => item.label === "plastic bottle")!;
const peel = GALLERY.find((item) => item.label === "banana peel")!;

let gateway: FakeGateway;
let kiosk: Kiosk;
let root: HTMLElement;

function text(testId: string): string {
  return root.querySelector(`[data-testid="${testId}"]`)!.textContent ?? "";
}

function button(testId: string): HTMLButtonElement {
  return root.querySelector(`[data-testid="${testId}"]`) as HTMLButtonElement;
}

function click(testId: string): Promise<void> {
  const target = button(testId);
  expect(target.disabled, `${testId} should be enabled`).toBe(false);
  target.click();
  return new Promise((resolve) => setTimeout(resolve, 0)); // let async handlers run
}

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
  gateway = new FakeGateway();
  kiosk = new Kiosk(root, gateway, gateway);
  kiosk.start();
});

describe("happy path: present, LED, throw, QR", () => {
  it("walks the full rewarded session and mirrors the push log exactly", async () => {
    expect(text("state")).toBe("Idle");
    await click(`present-plastic-bottle`);
    expect(text("state")).toBe("AwaitDisposal");
    expect(text("message")).toBe("Throw it in the YELLOW bin");
    expect(root.querySelector(".led")!.className).toContain("led-solid_yellow");

    await click("throw-yellow");
    expect(text("state")).toBe("RewardPrompt");
    expect(text("lcd")).toBe("show_qr_prompt");
    expect(text("countdown")).toBe("10s left");

    await click("scan-qr");
    expect(text("state")).toBe("Finalizing");
    expect(text("message")).toBe("Reward sent!");
    expect(text("lcd")).toBe("reward_sent");

    gateway.advance(0.1);
    expect(text("state")).toBe("Idle");

    // the kiosk displayed exactly the states the gateway pushed, in order
    // (the connect-time snapshot is subscriber-specific, not broadcast)
    const displayed = kiosk.stateHistory.filter((entry) => entry.cause !== "snapshot");
    expect(displayed.map((entry) => entry.state)).toEqual(
      gateway.pushLog.map((message) => message.state),
    );
    expect(displayed.map((entry) => entry.cause)).toEqual(
      gateway.pushLog.map((message) => message.cause),
    );
  });
});

describe("wrong-bin path", () => {
  it("shows the incorrect-bin feedback and never opens the reward prompt", async () => {
    await click("present-banana-peel");
    expect(text("message")).toBe("Throw it in the BROWN bin");
    await click("throw-blue");
    expect(text("state")).toBe("Finalizing");
    expect(text("message")).toBe("Wrong bin — no reward this time");
    expect(root.querySelector(".led")!.className).toContain("led-error");
    gateway.advance(0.1);
    expect(text("state")).toBe("Idle");
    expect(kiosk.stateHistory.map((entry) => entry.state)).not.toContain("RewardPrompt");
    const displayed = kiosk.stateHistory.filter((entry) => entry.cause !== "snapshot");
    expect(displayed.map((entry) => entry.state)).toEqual(
      gateway.pushLog.map((message) => message.state),
    );
  });
});

describe("unclaimed reward", () => {
  it("opens the NGO menu with four options after the 10 s window", async () => {
    await click("present-coffee-cup");
    await click("throw-yellow");
    expect(text("state")).toBe("RewardPrompt");
    gateway.advance(10);
    expect(text("state")).toBe("DonateMenu");
    expect(text("lcd")).toBe("ngo_menu");
    expect(text("countdown")).toBe("30s left");
    for (const n of [1, 2, 3, 4]) {
      expect(button(`ngo-${n}`).disabled).toBe(false);
    }
    await click("ngo-2");
    expect(text("feedback")).toBe("Reward sent!");
    expect(text("state")).toBe("Finalizing");
  });

  it("falls back to unclaimed when the menu is ignored too", async () => {
    await click("present-newspaper");
    await click("throw-blue");
    gateway.advance(10);
    expect(text("state")).toBe("DonateMenu");
    gateway.advance(30);
    expect(text("state")).toBe("Idle");
    expect(
      gateway.pushLog.some((message) => message.detail.outcome === "correct_unclaimed"),
    ).toBe(true);
  });
});

describe("button gating", () => {
  it("enables actions exactly when the controller state admits them", async () => {
    const presentButtons = GALLERY.map((item) => `present-${item.label.replace(/\s+/g, "-")}`);
    const throwButtons = ["throw-blue", "throw-yellow", "throw-brown"];
    const ngoButtons = ["ngo-1", "ngo-2", "ngo-3", "ngo-4"];

    const enabled = () => ({
      present: presentButtons.every((id) => !button(id).disabled),
      throw: throwButtons.every((id) => !button(id).disabled),
      qr: !button("scan-qr").disabled,
      ngo: ngoButtons.every((id) => !button(id).disabled),
    });

    expect(enabled()).toEqual({ present: true, throw: false, qr: false, ngo: false });
    await click("present-apple-core");
    expect(enabled()).toEqual({ present: false, throw: true, qr: false, ngo: false });
    await click("throw-brown");
    expect(enabled()).toEqual({ present: false, throw: false, qr: true, ngo: false });
    gateway.advance(10);
    expect(enabled()).toEqual({ present: false, throw: false, qr: false, ngo: true });
    gateway.advance(30);
    gateway.advance(0.1);
    expect(enabled()).toEqual({ present: true, throw: false, qr: false, ngo: false });
  });
});

describe("countdowns", () => {
  it("renders remaining time from pushed deadlines, not the local clock", async () => {
    await click("present-plastic-bottle");
    await click("throw-yellow");
    expect(text("countdown")).toBe("10s left");
    // local waiting must not change the display; only pushes carry time
    await new Promise((resolve) => setTimeout(resolve, 50));
    expect(text("countdown")).toBe("10s left");
    gateway.advance(10); // next push carries the donate deadline
    expect(text("countdown")).toBe("30s left");
  });
});

describe("connection status", () => {
  it("shows the reconnect banner while the stream is down", () => {
    const banner = root.querySelector('[data-testid="banner"]') as HTMLElement;
    expect(banner.hidden).toBe(true);
    gateway.dropConnection();
    expect(banner.hidden).toBe(false);
    gateway.restoreConnection();
    expect(banner.hidden).toBe(true);
  });
});

describe("gateway errors", () => {
  it("surfaces 4xx responses inline", async () => {
    gateway.failNext(403, "simulation mode is disabled");
    await click("present-newspaper");
    expect(text("feedback")).toBe("Error 403: simulation mode is disabled");
    expect(text("state")).toBe("Idle"); // nothing was displayed that was not pushed
  });
});
