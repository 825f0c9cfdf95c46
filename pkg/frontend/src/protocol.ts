/** Telemetry wire format shared with the session host. */

export interface StateFrame {
  type: "state";
  t: number;
  tool: [number, number, number];
  v: [number, number, number];
  b: number;
  subtask_pred: number;
  subtask_true: number;
  progress_pred: number;
  depth_mm: number;
  phase: string;
  prompt: string;
  target: [number, number, number];
  target_diameter: number;
  plane_x: number;
  degraded?: boolean;
}

export interface TrialEndFrame {
  type: "trial_end";
  report: Record<string, unknown>;
}

export type ServerFrame = StateFrame | TrialEndFrame;

export interface InputFrame {
  type: "input";
  pointer: [number, number]; // workpiece-plane coordinates (y, z) in meters
  grab: boolean;
  ts: number;                // client-monotone seconds; server drops reordered frames
}

export const SUBTASK_NAMES = ["Idle", "Tool-Attachment", "Driving", "Contact"] as const;

function isVec3(x: unknown): x is [number, number, number] {
  return Array.isArray(x) && x.length === 3 && x.every((v) => Number.isFinite(v));
}

/** Parse one server frame; returns null (with a console diagnostic) when malformed. */
export function parseServerFrame(text: string): ServerFrame | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    console.warn("dropped unparseable frame", text.slice(0, 80));
    return null;
  }
  if (typeof raw !== "object" || raw === null) {
    console.warn("dropped non-object frame");
    return null;
  }
  const frame = raw as Record<string, unknown>;
  if (frame.type === "trial_end") {
    if (typeof frame.report !== "object" || frame.report === null) {
      console.warn("dropped trial_end without report");
      return null;
    }
    return frame as unknown as TrialEndFrame;
  }
  if (frame.type === "state") {
    const numeric = ["t", "b", "subtask_pred", "subtask_true", "progress_pred",
      "depth_mm", "target_diameter", "plane_x"];
    for (const key of numeric) {
      if (typeof frame[key] !== "number" || !Number.isFinite(frame[key] as number)) {
        console.warn(`dropped state frame with bad ${key}`);
        return null;
      }
    }
    if (!isVec3(frame.tool) || !isVec3(frame.v) || !isVec3(frame.target)) {
      console.warn("dropped state frame with bad vectors");
      return null;
    }
    if (typeof frame.phase !== "string" || typeof frame.prompt !== "string") {
      console.warn("dropped state frame with bad phase/prompt");
      return null;
    }
    return frame as unknown as StateFrame;
  }
  console.warn("dropped frame of unknown type", frame.type);
  return null;
}

export function buildInputFrame(pointer: [number, number], grab: boolean,
  ts: number): string {
  const frame: InputFrame = { type: "input", pointer, grab, ts };
  return JSON.stringify(frame);
}
