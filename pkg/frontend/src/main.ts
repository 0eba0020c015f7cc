import { ApiClient } from "./api.js";
import { App } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

// Same-origin by default; override with e.g. ?api=http://127.0.0.1:8099
const base = new URLSearchParams(window.location.search).get("api") ?? "";
const app = new App(new ApiClient(base), root);
void app.start();
