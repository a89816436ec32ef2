// Pure state -> HTML/SVG string builders; main.ts only assigns the results
// into the DOM. Keeping these pure lets the tests cover rendering without a
// browser.

import { MODALITIES, MOVIES } from "./protocol.js";
import { beatFlashActive, commandsEnabled, type ConsoleState, type DeviceTile } from "./state.js";

export function sparklinePath(
  values: number[],
  width = 240,
  height = 48,
  loBpm = 40,
  hiBpm = 180,
): string {
  if (values.length === 0) return "";
  const n = values.length;
  const step = n > 1 ? width / (n - 1) : 0;
  const points = values.map((v, i) => {
    const clamped = Math.min(Math.max(v, loBpm), hiBpm);
    const y = height - ((clamped - loBpm) / (hiBpm - loBpm)) * height;
    return `${(i * step).toFixed(1)},${y.toFixed(1)}`;
  });
  return `M${points.join(" L")}`;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function deviceTileHtml(id: string, tile: DeviceTile, now: number): string {
  const bpm = tile.bpm === null ? "--" : tile.bpm.toFixed(1);
  const flash = beatFlashActive(tile, now) ? " beat" : "";
  const path = sparklinePath(tile.spark);
  return `
  <div class="tile${flash}" data-device="${escapeHtml(id)}">
    <div class="tile-head">participant ${escapeHtml(id)} <span class="pulse${flash}">&#9829;</span></div>
    <div class="bpm">${bpm}<span class="unit">bpm</span></div>
    <svg viewBox="0 0 240 48" class="spark"><path d="${path}"/></svg>
  </div>`;
}

export function devicesHtml(state: ConsoleState, now: number): string {
  const ids = Object.keys(state.devices).sort();
  if (ids.length === 0) return `<p class="hint">no devices reporting yet</p>`;
  return ids.map((id) => deviceTileHtml(id, state.devices[id]!, now)).join("\n");
}

export function modalityButtonsHtml(state: ConsoleState): string {
  const disabled = commandsEnabled(state) ? "" : " disabled";
  return MODALITIES.map((m) => {
    const active = state.modality === m ? " active" : "";
    return `<button class="modality${active}" data-modality="${m}"${disabled}>${m}</button>`;
  }).join("\n");
}

export function movieButtonsHtml(state: ConsoleState): string {
  const disabled = commandsEnabled(state) ? "" : " disabled";
  return MOVIES.map((title) => {
    const active = state.movie === title ? " active" : "";
    return `<button class="movie${active}" data-movie="${escapeHtml(title)}"${disabled}>${escapeHtml(title)}</button>`;
  }).join("\n");
}

export function lifecycleButtonsHtml(state: ConsoleState): string {
  const disabled = commandsEnabled(state) ? "" : " disabled";
  return (
    `<button data-lifecycle="start"${disabled}>start</button>\n` +
    `<button data-lifecycle="stop"${disabled}>stop</button>`
  );
}

export function bannerHtml(state: ConsoleState): string {
  if (state.connection !== "CONNECTED") {
    return `<div class="banner warn">${state.connection}</div>`;
  }
  if (state.errorBanner !== null) {
    return `<div class="banner error">${escapeHtml(state.errorBanner)}</div>`;
  }
  if (state.sessionState === "DEGRADED") {
    return `<div class="banner error">recording DEGRADED; routing still live</div>`;
  }
  return "";
}

export function statusLineHtml(state: ConsoleState): string {
  const segment =
    state.segmentIndex === null || state.segmentCount === null
      ? ""
      : ` &middot; segment ${state.segmentIndex + 1}/${state.segmentCount}`;
  const movie = state.movie === null ? "" : ` &middot; ${escapeHtml(state.movie)}`;
  return `<span class="phase ${state.sessionState}">${state.sessionState}</span>${segment}${movie}`;
}
