/** HTTP client for the gateway plus a reconnecting SSE push reader.
 *
 * The push reader uses fetch streaming rather than EventSource so the same
 * code runs in the browser and under node-based tests.
 */

import type { ActionResult, GatewayApi, PushSource, PushStatus, StateMessage } from "./types.js";

export const QR_SCHEME = "itrash://wallet/";

export class HttpGateway implements GatewayApi {
  constructor(private readonly baseUrl: string) {}

  private async post(path: string, body: unknown): Promise<ActionResult> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return { ok: response.ok, status: response.status, body: await response.text() };
  }

  async presentItem(imageB64: string): Promise<ActionResult> {
    const triggered = await this.post("/stimulus", { channel: "main_proximity", payload: {} });
    if (!triggered.ok) {
      return triggered;
    }
    return this.post("/stimulus", { channel: "camera", payload: { image_b64: imageB64 } });
  }

  throwIn(bin: string): Promise<ActionResult> {
    return this.post("/stimulus", { channel: "bin_proximity", payload: { bin } });
  }

  scanQr(payload: string): Promise<ActionResult> {
    return this.post("/qr", { payload });
  }

  async chooseNgo(ngoId: number): Promise<ActionResult> {
    const response = await fetch(`${this.baseUrl}/donate/${ngoId}`);
    return { ok: response.ok, status: response.status, body: await response.text() };
  }

  async walletAddress(): Promise<string> {
    const response = await fetch(this.baseUrl + "/wallet");
    const data = (await response.json()) as { address: string };
    return data.address;
  }

  /** Simulation-only: move the virtual clock (fires due timeouts). */
  advanceClock(seconds: number): Promise<ActionResult> {
    return this.post("/stimulus", { channel: "advance_clock", payload: { seconds } });
  }

  async state(): Promise<StateMessage> {
    const response = await fetch(this.baseUrl + "/state");
    return (await response.json()) as StateMessage;
  }
}

export class SseSource implements PushSource {
  constructor(
    private readonly url: string,
    private readonly retryMs = 1000,
  ) {}

  connect(
    onMessage: (message: StateMessage) => void,
    onStatus: (status: PushStatus) => void,
  ): () => void {
    let stopped = false;
    let controller: AbortController | null = null;

    const pump = async (): Promise<void> => {
      while (!stopped) {
        onStatus("connecting");
        controller = new AbortController();
        try {
          const response = await fetch(this.url, {
            signal: controller.signal,
            headers: { accept: "text/event-stream" },
          });
          if (!response.ok || !response.body) {
            throw new Error(`stream rejected: ${response.status}`);
          }
          onStatus("open");
          await this.readEvents(response.body, onMessage);
        } catch {
          // connection dropped or aborted; retry below unless stopped
        }
        if (stopped) {
          break;
        }
        onStatus("lost");
        await new Promise((resolve) => setTimeout(resolve, this.retryMs));
      }
    };

    void pump();
    return () => {
      stopped = true;
      controller?.abort();
    };
  }

  private async readEvents(
    body: ReadableStream<Uint8Array>,
    onMessage: (message: StateMessage) => void,
  ): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    let eventType = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        return;
      }
      buffer += decoder.decode(value, { stream: true });
      let newline;
      while ((newline = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, newline).replace(/\r$/, "");
        buffer = buffer.slice(newline + 1);
        if (line.startsWith("event: ")) {
          eventType = line.slice("event: ".length);
        } else if (line.startsWith("data: ") && eventType === "state") {
          onMessage(JSON.parse(line.slice("data: ".length)) as StateMessage);
        }
        // heartbeat events only keep the connection warm
      }
    }
  }
}
