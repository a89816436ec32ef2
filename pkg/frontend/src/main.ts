// Entry point: owns the state, wires the socket to the store, re-renders on
// every change plus a short tick so beat flashes decay.

import type { Command } from "./protocol.js";
import {
  bannerHtml,
  devicesHtml,
  lifecycleButtonsHtml,
  modalityButtonsHtml,
  movieButtonsHtml,
  statusLineHtml,
} from "./render.js";
import { ConsoleSocket } from "./socket.js";
import { applyEvent, initialState, setConnection, type ConsoleState } from "./state.js";

let state: ConsoleState = initialState();

const defaultUrl = `ws://${location.host}/ws`;
const url = new URLSearchParams(location.search).get("bridge") ?? defaultUrl;

const socket = new ConsoleSocket(url, {
  onEvent(event) {
    state = applyEvent(state, event, Date.now());
    render();
  },
  onConnection(status) {
    state = setConnection(state, status);
    render();
  },
});

function byId(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing #${id}`);
  return el;
}

function render(): void {
  const now = Date.now();
  byId("banner").innerHTML = bannerHtml(state);
  byId("status-line").innerHTML = statusLineHtml(state);
  byId("devices").innerHTML = devicesHtml(state, now);
  byId("modalities").innerHTML = modalityButtonsHtml(state);
  byId("movies").innerHTML = movieButtonsHtml(state);
  byId("lifecycle").innerHTML = lifecycleButtonsHtml(state);
}

function send(command: Command): void {
  socket.send(command); // state changes only arrive via acknowledged events
}

document.addEventListener("click", (event) => {
  const target = event.target;
  if (!(target instanceof HTMLElement) || target.hasAttribute("disabled")) return;
  const modality = target.dataset.modality;
  if (modality) send({ type: "set_modality", value: modality });
  const movie = target.dataset.movie;
  if (movie) send({ type: "set_movie", value: movie });
  const lifecycle = target.dataset.lifecycle;
  if (lifecycle === "start") send({ type: "start" });
  if (lifecycle === "stop") send({ type: "stop" });
});

setInterval(render, 120); // beat flash decay
socket.connect();
render();
