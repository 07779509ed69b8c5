/** Browser entry point: mount the kiosk against a gateway base URL.
 *
 * Defaults to the serving origin; override with ?gateway=http://host:port
 * when the gateway runs elsewhere.
 */

import { HttpGateway, SseSource } from "./gateway.js";
import { Kiosk } from "./kiosk.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("gateway") ?? window.location.origin;

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}

const kiosk = new Kiosk(root, new HttpGateway(base), new SseSource(`${base}/events`));
kiosk.start();

declare global {
  interface Window {
    kiosk: Kiosk;
  }
}
window.kiosk = kiosk;
