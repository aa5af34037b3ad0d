// Bootstrap: wire the controller to the page and start the poll loop.

import { OpsClient, type CommandWhen } from "./api.js";
import { ConsoleController } from "./controller.js";
import { render } from "./render.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8600";

const controller = new ConsoleController(new OpsClient(base), (view) =>
  render(view, document),
);

function commandWhen(): CommandWhen {
  const day = (document.getElementById("when-day") as HTMLInputElement).value;
  return day.trim() === "" ? "next_window" : { day: Number(day) };
}

document.getElementById("queue-btn")!.addEventListener("click", async () => {
  const btn = document.getElementById("queue-btn") as HTMLButtonElement;
  const profile = (document.getElementById("profile-select") as HTMLSelectElement).value;
  btn.disabled = true; // one click, one API call
  await controller.queueProfile(profile, commandWhen());
  btn.disabled = false;
});

document.getElementById("rate-btn")!.addEventListener("click", () => {
  const rate = Number((document.getElementById("rate-input") as HTMLInputElement).value);
  void controller.setClockRate(Number.isFinite(rate) ? rate : 0);
});

document.getElementById("pause-btn")!.addEventListener("click", () => {
  void controller.setClockRate(0);
});

document.getElementById("step-btn")!.addEventListener("click", () => {
  void controller.stepClock(3600);
});

document.getElementById("files")!.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  const fileAttr = target.dataset.file;
  if (fileAttr) void controller.selectFile(Number(fileAttr));
});

await controller.bootstrap();
window.setInterval(() => void controller.poll(), 1000);
