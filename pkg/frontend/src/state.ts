// Console state store. The bridge is the single source of truth: modality,
// movie and session phase only ever change on acknowledged status events,
// never on optimistically sent commands.

import type { BridgeEvent } from "./protocol.js";

export type Connection = "CONNECTING" | "CONNECTED" | "DISCONNECTED";

export const SPARK_CAPACITY = 120;
export const BEAT_FLASH_MS = 300;

export interface DeviceTile {
  bpm: number | null;
  lastTs: number | null;
  spark: number[]; // last SPARK_CAPACITY estimates
  beatAt: number | null; // local clock ms of last beat_event
}

export interface ConsoleState {
  connection: Connection;
  sessionState: string;
  modality: string | null;
  movie: string | null;
  segmentIndex: number | null;
  segmentCount: number | null;
  devices: Record<string, DeviceTile>;
  errorBanner: string | null;
}

export function initialState(): ConsoleState {
  return {
    connection: "CONNECTING",
    sessionState: "UNKNOWN",
    modality: null,
    movie: null,
    segmentIndex: null,
    segmentCount: null,
    devices: {},
    errorBanner: null,
  };
}

function tile(state: ConsoleState, device: string): DeviceTile {
  return state.devices[device] ?? { bpm: null, lastTs: null, spark: [], beatAt: null };
}

export function setConnection(state: ConsoleState, connection: Connection): ConsoleState {
  const errorBanner =
    connection === "DISCONNECTED"
      ? "bridge disconnected; retrying..."
      : connection === "CONNECTED"
        ? null
        : state.errorBanner;
  return { ...state, connection, errorBanner };
}

export function applyEvent(state: ConsoleState, event: BridgeEvent, now: number): ConsoleState {
  switch (event.type) {
    case "hr": {
      const previous = tile(state, event.device);
      const spark = [...previous.spark, event.bpm].slice(-SPARK_CAPACITY);
      return {
        ...state,
        devices: {
          ...state.devices,
          [event.device]: { ...previous, bpm: event.bpm, lastTs: event.ts, spark },
        },
      };
    }
    case "beat_event": {
      const previous = tile(state, event.device);
      return {
        ...state,
        devices: { ...state.devices, [event.device]: { ...previous, beatAt: now } },
      };
    }
    case "status": {
      const devices = { ...state.devices };
      for (const [id, snapshot] of Object.entries(event.devices)) {
        const previous = tile(state, id);
        devices[id] = {
          ...previous,
          bpm: snapshot.last_bpm ?? previous.bpm,
          lastTs: snapshot.last_hr_ts ?? previous.lastTs,
        };
      }
      return {
        ...state,
        sessionState: event.state,
        modality: event.modality,
        movie: event.movie,
        segmentIndex: event.segment_index,
        segmentCount: event.segment_count,
        devices,
        errorBanner: event.error ?? null,
      };
    }
    case "error":
      return { ...state, errorBanner: event.message };
    case "ack":
      return state; // the follow-up status event carries the actual change
  }
}

export function commandsEnabled(state: ConsoleState): boolean {
  return state.connection === "CONNECTED";
}

export function beatFlashActive(t: DeviceTile, now: number): boolean {
  return t.beatAt !== null && now - t.beatAt < BEAT_FLASH_MS;
}
