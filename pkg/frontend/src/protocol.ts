// Bridge wire protocol: JSON text frames over the orchestrator's /ws
// endpoint. Everything arriving from the socket is schema-validated here;
// anything that doesn't parse is dropped before it can reach rendering.

import { z } from "zod";

export const MODALITIES = ["WithoutHeart", "WithOwnHeart", "WithNeighborHeart"] as const;
export const MOVIES = ["big bunny", "overwatch", "for the birds"] as const;

const deviceStatus = z.object({
  last_bpm: z.number().nullable(),
  last_hr_ts: z.number().nullable(),
});

export const statusEvent = z
  .object({
    type: z.literal("status"),
    state: z.string(),
    pair_id: z.string().nullable(),
    segment_index: z.number().nullable(),
    segment_count: z.number().nullable(),
    modality: z.string().nullable(),
    movie: z.string().nullable(),
    devices: z.record(deviceStatus),
    error: z.string().optional(),
  })
  .passthrough();

export const hrEvent = z
  .object({
    type: z.literal("hr"),
    device: z.string(),
    bpm: z.number(),
    ts: z.number(),
  })
  .passthrough();

export const beatEvent = z
  .object({
    type: z.literal("beat_event"),
    device: z.string(),
    bpm: z.number().nullable(),
    ts: z.number(),
  })
  .passthrough();

export const ackFrame = z.object({ type: z.literal("ack"), cmd: z.string() }).passthrough();

export const errorFrame = z
  .object({ type: z.literal("error"), message: z.string() })
  .passthrough();

export const bridgeEvent = z.discriminatedUnion("type", [
  statusEvent,
  hrEvent,
  beatEvent,
  ackFrame,
  errorFrame,
]);

export type StatusEvent = z.infer<typeof statusEvent>;
export type HrEvent = z.infer<typeof hrEvent>;
export type BeatEvent = z.infer<typeof beatEvent>;
export type BridgeEvent = z.infer<typeof bridgeEvent>;

export function parseEvent(raw: unknown): BridgeEvent | null {
  if (typeof raw !== "string") return null;
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  const result = bridgeEvent.safeParse(data);
  return result.success ? result.data : null;
}

export type Command =
  | { type: "set_modality"; value: string }
  | { type: "set_movie"; value: string }
  | { type: "start" }
  | { type: "stop" };

// Key order matters: these frames must be byte-identical to what the other
// command paths (CLI/REST tests) send, so log records come out the same.
export function serializeCommand(command: Command): string {
  return JSON.stringify(command);
}
