/** The kiosk panel: renders exactly what the gateway pushes, nothing else.
 *
 * Every displayed state comes from a push-stream message (the full history
 * is kept in `stateHistory` so tests can compare it against the gateway's
 * own log). Action buttons are enabled exactly when the controller state
 * admits the corresponding event, countdowns are computed from deadlines
 * and timestamps carried in the pushes (never from the local clock), and
 * gateway errors are surfaced inline.
 */

import { GALLERY, GalleryItem, slug } from "./gallery.js";
import { QR_SCHEME } from "./gateway.js";
import type { ActionResult, GatewayApi, PushSource, PushStatus, StateMessage } from "./types.js";

const STATE_TEXT: Record<string, string> = {
  Idle: "Ready — show an item to the camera",
  Capturing: "Capturing image…",
  Classifying: "Classifying…",
  PromptRetry: "Could not classify the item — please try again",
  RewardPrompt: "Correct! Scan your wallet QR code to claim the reward",
  DonateMenu: "Pick an NGO to receive your reward",
  Finalizing: "Finishing up…",
};

const OUTCOME_TEXT: Record<string, string> = {
  correct_rewarded: "Reward sent!",
  correct_unclaimed: "Reward window closed",
  incorrect_bin: "Wrong bin — no reward this time",
  timeout: "Timed out — the item was not disposed",
};

const BINS = ["blue", "yellow", "brown"] as const;

export class Kiosk {
  /** Every state displayed, in order, as received from the push stream. */
  readonly stateHistory: { state: string; cause: string }[] = [];

  private current: StateMessage | null = null;
  private status: PushStatus = "connecting";
  private feedback = "";
  private disconnect: (() => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly gateway: GatewayApi,
    private readonly push: PushSource,
    private readonly gallery: GalleryItem[] = GALLERY,
  ) {
    this.buildDom();
    this.render();
  }

  start(): void {
    this.disconnect = this.push.connect(
      (message) => this.onMessage(message),
      (status) => this.onStatus(status),
    );
  }

  stop(): void {
    this.disconnect?.();
    this.disconnect = null;
  }

  get state(): string {
    return this.current?.state ?? "";
  }

  private onMessage(message: StateMessage): void {
    this.current = message;
    this.stateHistory.push({ state: message.state, cause: message.cause ?? "" });
    this.render();
  }

  private onStatus(status: PushStatus): void {
    this.status = status;
    this.render();
  }

  // --- user actions ---------------------------------------------------------

  async present(item: GalleryItem): Promise<void> {
    if (this.state !== "Idle") {
      return;
    }
    this.feedback = "";
    this.surface(await this.gateway.presentItem(item.imageB64));
  }

  async throwIn(bin: string): Promise<void> {
    if (this.state !== "AwaitDisposal") {
      return;
    }
    this.surface(await this.gateway.throwIn(bin));
  }

  async scanQr(): Promise<void> {
    if (this.state !== "RewardPrompt") {
      return;
    }
    const address = await this.gateway.walletAddress();
    this.surface(await this.gateway.scanQr(`${QR_SCHEME}${address}`));
  }

  async chooseNgo(ngoId: number): Promise<void> {
    if (this.state !== "DonateMenu") {
      return;
    }
    const result = await this.gateway.chooseNgo(ngoId);
    if (result.ok) {
      this.feedback = result.body; // "Reward sent!"
      this.render();
    } else {
      this.surface(result);
    }
  }

  private surface(result: ActionResult): void {
    if (!result.ok) {
      this.feedback = `Error ${result.status}: ${result.body}`;
      this.render();
    }
  }

  // --- rendering --------------------------------------------------------------

  private buildDom(): void {
    const galleryButtons = this.gallery
      .map(
        (item) =>
          `<button data-testid="present-${slug(item.label)}" data-item="${item.id}">` +
          `${item.label}</button>`,
      )
      .join("");
    const binButtons = BINS.map(
      (bin) => `<button data-testid="throw-${bin}" data-bin="${bin}">${bin} bin</button>`,
    ).join("");
    const ngoButtons = [1, 2, 3, 4]
      .map((n) => `<button data-testid="ngo-${n}" data-ngo="${n}">NGO ${n}</button>`)
      .join("");

    this.root.innerHTML = `
      <div class="kiosk">
        <div class="banner" data-testid="banner" hidden>Connection lost — reconnecting…</div>
        <div class="led" data-testid="led"></div>
        <h2 data-testid="state"></h2>
        <p class="message" data-testid="message"></p>
        <p class="lcd" data-testid="lcd"></p>
        <p class="countdown" data-testid="countdown"></p>
        <p class="feedback" data-testid="feedback"></p>
        <section class="gallery">
          <h3>Present an item</h3>
          ${galleryButtons}
        </section>
        <section class="bins">
          <h3>Throw it in…</h3>
          ${binButtons}
        </section>
        <section class="reward">
          <button data-testid="scan-qr">Scan wallet QR</button>
        </section>
        <section class="ngos" data-testid="ngo-menu">
          <h3>Donate to an NGO</h3>
          ${ngoButtons}
        </section>
      </div>
    `;

    this.root.querySelectorAll<HTMLButtonElement>("[data-item]").forEach((button) => {
      const item = this.gallery.find((entry) => entry.id === Number(button.dataset.item));
      if (item) {
        button.addEventListener("click", () => void this.present(item));
      }
    });
    this.root.querySelectorAll<HTMLButtonElement>("[data-bin]").forEach((button) => {
      button.addEventListener("click", () => void this.throwIn(button.dataset.bin!));
    });
    this.query("scan-qr").addEventListener("click", () => void this.scanQr());
    this.root.querySelectorAll<HTMLButtonElement>("[data-ngo]").forEach((button) => {
      button.addEventListener("click", () => void this.chooseNgo(Number(button.dataset.ngo)));
    });
  }

  private query(testId: string): HTMLElement {
    return this.root.querySelector(`[data-testid="${testId}"]`) as HTMLElement;
  }

  private render(): void {
    const message = this.current;
    const state = this.state;

    this.query("banner").hidden = this.status === "open";
    this.query("state").textContent = state || "connecting";

    let text = STATE_TEXT[state] ?? "";
    if (state === "AwaitDisposal" && message?.detail.predicted) {
      text = `Throw it in the ${message.detail.predicted.toUpperCase()} bin`;
    }
    if (state === "Finalizing" && message?.detail.outcome) {
      const outcome = message.detail.outcome.split(":")[0];
      text = OUTCOME_TEXT[outcome] ?? (outcome.startsWith("correct_donated") ? "Reward sent!" : text);
      if (outcome === "correct_donated") {
        text = "Reward sent!";
      }
    }
    this.query("message").textContent = text;

    const led = this.query("led");
    led.className = message?.led ? `led led-${message.led}` : "led";
    led.textContent = message?.led ?? "";

    this.query("lcd").textContent = message?.lcd ?? "";

    const deadline = message?.detail.deadline;
    this.query("countdown").textContent =
      deadline !== undefined && message
        ? `${Math.max(0, Math.round(deadline - message.time))}s left`
        : "";

    this.query("feedback").textContent = this.feedback;

    this.setEnabled("[data-item]", state === "Idle");
    this.setEnabled("[data-bin]", state === "AwaitDisposal");
    (this.query("scan-qr") as HTMLButtonElement).disabled = state !== "RewardPrompt";
    this.setEnabled("[data-ngo]", state === "DonateMenu");
  }

  private setEnabled(selector: string, enabled: boolean): void {
    this.root.querySelectorAll<HTMLButtonElement>(selector).forEach((button) => {
      button.disabled = !enabled;
    });
  }
}
