import { ApiClient } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  // served under /ui/ by the pipeline service, so the API lives at the origin
  new App(root, new ApiClient("")).mount();
}
