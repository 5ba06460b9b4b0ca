import { OperatorClient } from "./client.js";
import { ConsoleUI } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const fogUrl = params.get("fog") ?? `http://${window.location.hostname}:7801`;

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");
new ConsoleUI(new OperatorClient(fogUrl), root);
