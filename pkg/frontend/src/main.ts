import { mountApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = mountApp(root, { baseUrl: "" });
  void app.start();
}
