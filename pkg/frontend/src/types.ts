/** Wire shapes of the gateway push channel and action endpoints. */

export interface StateDetail {
  predicted?: string;
  thrown?: string;
  deadline?: number;
  ngo_options?: number[];
  outcome?: string;
}

/** One message on the push stream; also the GET /state snapshot shape. */
export interface StateMessage {
  state: string;
  detail: StateDetail;
  led: string | null;
  lcd: string | null;
  time: number;
  cause?: string;
}

export interface ActionResult {
  ok: boolean;
  status: number;
  body: string;
}

/** Everything the kiosk is allowed to do: gateway HTTP actions only. */
export interface GatewayApi {
  presentItem(imageB64: string): Promise<ActionResult>;
  throwIn(bin: string): Promise<ActionResult>;
  scanQr(payload: string): Promise<ActionResult>;
  chooseNgo(ngoId: number): Promise<ActionResult>;
  walletAddress(): Promise<string>;
}

export type PushStatus = "connecting" | "open" | "lost";

export interface PushSource {
  /** Start streaming; returns a disconnect function. */
  connect(
    onMessage: (message: StateMessage) => void,
    onStatus: (status: PushStatus) => void,
  ): () => void;
}
