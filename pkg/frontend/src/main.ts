import { mountStudio } from "./ui.js";

const root = document.getElementById("app");
if (root) {
  void mountStudio(root);
}
