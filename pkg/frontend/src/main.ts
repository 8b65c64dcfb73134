// DOM glue: canvases, keyboard shortcuts, polling loops.

import { Choice, HttpLabelApi } from "./api.js";
import { boundsFor } from "./playback.js";
import { drawClip } from "./render.js";
import { Session } from "./session.js";

const FPS = 20;
const STATUS_POLL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const api = new HttpLabelApi("");
  const session = new Session(api);

  const leftCanvas = el<HTMLCanvasElement>("left-clip");
  const rightCanvas = el<HTMLCanvasElement>("right-clip");
  const banner = el<HTMLDivElement>("banner");
  const queryInfo = el<HTMLDivElement>("query-info");
  const progress = el<HTMLDivElement>("progress-fill");
  const progressText = el<HTMLDivElement>("progress-text");
  const statusLine = el<HTMLDivElement>("status-line");
  const leftCtx = leftCanvas.getContext("2d")!;
  const rightCtx = rightCanvas.getContext("2d")!;

  async function submit(choice: Choice): Promise<void> {
    if (await session.submit(choice)) {
      void session.pollStatus();
    }
    void session.pollQuery();
  }

  for (const [id, choice] of [
    ["btn-left", "left"],
    ["btn-right", "right"],
    ["btn-equal", "equal"],
    ["btn-skip", "skip"],
  ] as const) {
    el<HTMLButtonElement>(id).addEventListener("click", () => void submit(choice));
  }

  document.addEventListener("keydown", (ev) => {
    const mapping: Record<string, Choice> = {
      ArrowLeft: "left",
      ArrowRight: "right",
      e: "equal",
      E: "equal",
      s: "skip",
      S: "skip",
    };
    const choice = mapping[ev.key];
    if (choice) {
      ev.preventDefault();
      void submit(choice);
    }
  });

  function render(): void {
    const query = session.current;
    if (query && session.clips) {
      const bounds = boundsFor(query.env, query.left.concat(query.right));
      drawClip(leftCtx, query.left, session.clips.leftCursor, bounds,
               leftCanvas.width, leftCanvas.height, "#2b7de9");
      drawClip(rightCtx, query.right, session.clips.rightCursor, bounds,
               rightCanvas.width, rightCanvas.height, "#e9642b");
      queryInfo.textContent =
        `query ${query.id} | ${query.env} | ${query.segment_length} steps | ` +
        `frame ${session.clips.leftCursor + 1}/${session.clips.length}`;
    } else {
      for (const [ctx, canvas] of [
        [leftCtx, leftCanvas],
        [rightCtx, rightCanvas],
      ] as const) {
        ctx.clearRect(0, 0, canvas.width, canvas.height);
      }
      queryInfo.textContent = "waiting for queries...";
    }
    banner.textContent = session.banner ?? "";
    banner.style.display = session.banner ? "block" : "none";
    const st = session.status;
    if (st) {
      const frac = st.budget > 0 ? st.labels_used / st.budget : 0;
      progress.style.width = `${Math.round(100 * frac)}%`;
      progressText.textContent = `labels ${st.labels_used}/${st.budget}`;
      statusLine.textContent =
        `step ${st.step} | pending ${st.pending_queries} | ` +
        (st.latest_return === null ? "no evaluation yet"
          : `latest return ${st.latest_return.toFixed(2)}`) +
        (st.running ? "" : " | run finished");
    }
  }

  setInterval(() => {
    session.advanceClips();
    render();
  }, 1000 / FPS);

  setInterval(() => void session.pollStatus(), STATUS_POLL_MS);
  setInterval(() => void session.pollQuery(), STATUS_POLL_MS);
  void session.pollStatus();
  void session.pollQuery();
}

main();
