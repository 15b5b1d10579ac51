// Browser wiring: reads form inputs, drives the stores, repaints panels.

import { ApiClient } from "./api.js";
import { ChatStore, SelectionStore } from "./state.js";
import { renderError, renderModelCount, renderSelectionTable, renderTranscript } from "./render.js";
import type { SelectionMode } from "./types.js";

const baseUrl = (window as { MEDAIDE_BASE_URL?: string }).MEDAIDE_BASE_URL ?? "";
const api = new ApiClient(baseUrl);
const chat = new ChatStore(api);
const selection = new SelectionStore(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function paintChat(): void {
  el("transcript").innerHTML = renderTranscript(chat.turns, chat.pendingQuery);
  el("chat-error").innerHTML = renderError(chat.error, chat.failedQuery !== null);
  const retry = document.getElementById("retry-button");
  if (retry) retry.addEventListener("click", () => void sendRetry());
  const input = el<HTMLInputElement>("chat-input");
  const send = el<HTMLButtonElement>("send-button");
  send.disabled = chat.pending || !input.value.trim();
  input.disabled = chat.pending;
  el("transcript").scrollTop = el("transcript").scrollHeight;
}

function paintSelection(): void {
  el("selection-result").innerHTML = renderSelectionTable(selection.result);
  el("selection-error").innerHTML = renderError(selection.error, false);
  for (const [field, message] of Object.entries(selection.fieldErrors)) {
    const node = document.getElementById(`error-${field}`);
    if (node) node.textContent = message ?? "";
  }
}

async function sendCurrent(): Promise<void> {
  const input = el<HTMLInputElement>("chat-input");
  const text = input.value;
  input.value = "";
  paintChat();
  await chat.send(text);
  paintChat();
}

async function sendRetry(): Promise<void> {
  paintChat();
  await chat.retry();
  paintChat();
}

async function submitSelection(): Promise<void> {
  selection.profile = {
    name: el<HTMLInputElement>("profile-name").value,
    device_class: el<HTMLSelectElement>("profile-class").value as never,
    vram_gb: Number(el<HTMLInputElement>("profile-vram").value),
    ram_gb: Number(el<HTMLInputElement>("profile-ram").value),
  };
  await selection.submit();
  paintSelection();
}

function init(): void {
  el<HTMLFormElement>("login-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const token = el<HTMLInputElement>("token-input").value;
    void chat.login(token).then((ok) => {
      el("login-error").innerHTML = renderError(chat.error, false);
      if (!ok) return;
      el("login-panel").hidden = true;
      el("app-panel").hidden = false;
      el("models-summary").innerHTML = renderModelCount(chat.models.length);
      paintChat();
    });
  });

  el<HTMLFormElement>("chat-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void sendCurrent();
  });
  el<HTMLInputElement>("chat-input").addEventListener("input", paintChat);

  el<HTMLFormElement>("selection-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void submitSelection();
  });
  for (const mode of ["realtime", "accuracy"] as SelectionMode[]) {
    el<HTMLInputElement>(`mode-${mode}`).addEventListener("change", () => {
      void selection.setMode(mode).then(paintSelection);
    });
  }
}

document.addEventListener("DOMContentLoaded", init);
