/** Console bootstrap: canvas, pointer capture, render loop. */

import { SessionClient } from "./client.js";
import { canvasToWorld, defaultLayout, renderScene } from "./scene.js";

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const override = params.get("server");
  if (override) return override;
  const host = window.location.hostname || "127.0.0.1";
  return `ws://${host}:8754/ws`;
}

function main(): void {
  const canvas = document.getElementById("scene") as HTMLCanvasElement;
  const banner = document.getElementById("banner") as HTMLDivElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");
  const layout = defaultLayout(canvas.width, canvas.height);

  const client = new SessionClient(serverUrl());
  client.connect();

  canvas.addEventListener("pointermove", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const [y, z] = canvasToWorld(layout, ev.clientX - rect.left, ev.clientY - rect.top);
    client.setPointer(y, z);
  });
  canvas.addEventListener("pointerdown", () => client.setGrab(true));
  window.addEventListener("pointerup", () => client.setGrab(false));
  window.addEventListener("keydown", (ev) => {
    if (ev.code === "Space") client.setGrab(true);
  });
  window.addEventListener("keyup", (ev) => {
    if (ev.code === "Space") client.setGrab(false);
  });

  const draw = () => {
    if (client.state !== "open") {
      banner.textContent = client.state === "connecting"
        ? "connecting to session host..."
        : "disconnected - trial aborted; reconnecting...";
      banner.style.display = "block";
    } else {
      banner.style.display = "none";
    }
    if (client.latest) {
      renderScene(ctx, layout, client.latest);
    } else {
      ctx.fillStyle = "#10141a";
      ctx.fillRect(0, 0, layout.width, layout.height);
      ctx.fillStyle = "#9aa3ad";
      ctx.font = "16px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText("waiting for state frames...", layout.width / 2, layout.height / 2);
    }
    requestAnimationFrame(draw);
  };
  requestAnimationFrame(draw);
}

window.addEventListener("load", main);
