import { ApiClient } from "./api";
import { App } from "./app";

const params = new URLSearchParams(window.location.search);
const baseUrl =
  params.get("service") ?? "http://127.0.0.1:8330";

const root = document.getElementById("root");
if (!root) throw new Error("missing #root element");

const app = new App(root, new ApiClient(baseUrl));
void app.start();
