// Browser entry point: same-origin API, real localStorage.

import { TrailbotClient } from "./api.js";
import { createApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  createApp(document, root, new TrailbotClient(""), window.localStorage);
}
