import { GatewayClient } from "./api.js";
import { PanelStore } from "./store.js";
import { PanelView } from "./view.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("gateway") ?? "http://127.0.0.1:8888";
const interval = Number(params.get("interval") ?? "1000");

const store = new PanelStore(new GatewayClient(baseUrl), interval);
new PanelView(store, document.getElementById("app")!);
store.start();
