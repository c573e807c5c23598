import { ClientApi } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = new App(new ClientApi(""), root);
  app.start();
}
