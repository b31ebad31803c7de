import { makeApiClient } from "./api.js";
import { LabelerApp, choiceForKey } from "./app.js";
import type { AppView } from "./app.js";
import type { BudgetStatus } from "./types.js";

/** DOM wiring: everything stateful lives in LabelerApp, this file only paints. */

const POLL_MS = 1000;

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

function headline(view: AppView): string {
  switch (view.phase) {
    case "connecting":
      return "connecting to the optimizer";
    case "waiting":
      return "optimizer running, waiting for the next triplet";
    case "showing":
      return "pick the candidate more similar to the reference";
    case "submitting":
      return "recording your choice";
    case "done":
      return "run finished";
    case "failed":
      return "run failed";
    case "error":
      return "cannot display the current request";
  }
}

function progressLine(view: AppView): string {
  const status = view.status;
  if (!status) {
    return "";
  }
  const parts: string[] = [];
  if (status.task && status.strategy) {
    parts.push(`${status.task} / ${status.strategy}`);
  }
  if (status.iteration !== undefined && status.total_iterations !== undefined) {
    parts.push(`iteration ${status.iteration} of ${status.total_iterations}`);
  }
  const budget: BudgetStatus | undefined = view.triplet?.budget ?? status.budget;
  if (budget) {
    parts.push(`judgments ${budget.used} of ${budget.total}`);
  }
  return parts.join(" | ");
}

function finalLine(view: AppView): string {
  const final = view.status?.final;
  if (!final) {
    return "run finished";
  }
  return (
    `final coverage ${final.coverage_archive.toFixed(2)}% ` +
    `(all solutions ${final.coverage_all.toFixed(2)}%), ` +
    `qd score ${final.qd_score_archive.toFixed(2)}, ` +
    `${final.judgments_used} judgments used`
  );
}

function render(view: AppView): void {
  byId("run-line").textContent = headline(view);
  byId("progress-line").textContent = progressLine(view);

  const banner = byId("banner");
  banner.hidden = view.banner === null;
  banner.textContent = view.banner ?? "";

  const triplet = byId("triplet");
  if (view.svg === null) {
    triplet.hidden = true;
  } else {
    triplet.hidden = false;
    byId("art-ref").innerHTML = view.svg.ref;
    byId("art-a").innerHTML = view.svg.a;
    byId("art-b").innerHTML = view.svg.b;
  }

  const final = byId("final");
  final.hidden = view.phase !== "done";
  if (view.phase === "done") {
    final.textContent = finalLine(view);
  }
}

function start(): void {
  const app = new LabelerApp(makeApiClient(), { onChange: render });
  render(app.view());

  const timer = setInterval(() => {
    if (app.finished) {
      clearInterval(timer);
      return;
    }
    void app.pollOnce();
  }, POLL_MS);
  void app.pollOnce();

  document.addEventListener("keydown", (event) => {
    const choice = choiceForKey(event.key);
    if (choice !== null) {
      event.preventDefault();
      void app.choose(choice);
    }
  });
  byId("pick-a").addEventListener("click", () => void app.choose("A"));
  byId("pick-b").addEventListener("click", () => void app.choose("B"));
  byId("pick-skip").addEventListener("click", () => void app.choose("skip"));
}

start();
