// DOM bootstrap: login, view switching, event wiring. All state transitions
// live in state.ts; this file only glues them to the page.

import { ApiClient, ApiError } from "./api.js";
import { renderCustomerView, renderOperatorView } from "./render.js";
import {
  applyOperatorData,
  applyProgrammes,
  applySchedule,
  applySignalsResponse,
  applySimState,
  applyStreamEvent,
  applyStreamStatus,
  beginOverride,
  initialCustomerState,
  initialOperatorState,
  operatorRefreshWorthy,
  overrideFailed,
  overrideSucceeded,
  setInlineError,
  type CustomerState,
  type OperatorState,
} from "./state.js";
import { StreamClient } from "./sse.js";

const root = document.getElementById("app")!;

function renderLogin(message = ""): void {
  root.innerHTML = `
  <section class="panel login">
    <h2>Connect</h2>
    ${message ? `<div class="banner error">${message}</div>` : ""}
    <label>Server <input id="base" value="${location.origin.startsWith("http") ? "http://127.0.0.1:8423" : ""}"></label>
    <label>Actor id <input id="actor" placeholder="cust-1 or grid-op"></label>
    <label>Token <input id="token" placeholder="tok-cust-1"></label>
    <label>Role
      <select id="role">
        <option value="customer">customer</option>
        <option value="operator">operator</option>
      </select>
    </label>
    <button id="connect">Open console</button>
  </section>`;
  document.getElementById("connect")!.addEventListener("click", () => {
    const base = (document.getElementById("base") as HTMLInputElement).value.replace(/\/$/, "");
    const actor = (document.getElementById("actor") as HTMLInputElement).value.trim();
    const token = (document.getElementById("token") as HTMLInputElement).value.trim();
    const role = (document.getElementById("role") as HTMLSelectElement).value;
    if (role === "customer") {
      void runCustomer(new ApiClient(base, token), actor);
    } else {
      void runOperator(new ApiClient(base, token));
    }
  });
}

async function runCustomer(api: ApiClient, customerId: string): Promise<void> {
  let state: CustomerState = initialCustomerState(customerId);

  const update = (next: CustomerState): void => {
    state = next;
    root.innerHTML = renderCustomerView(state);
    wireCustomerActions();
  };

  const refresh = async (): Promise<CustomerState> => {
    const [progs, signals, schedule, sim] = await Promise.all([
      api.listProgrammes(),
      api.signals(customerId),
      api.schedule(customerId),
      api.simState(),
    ]);
    let next = applyProgrammes(state, progs.programmes);
    next = applySignalsResponse(next, signals);
    next = applySchedule(next, schedule);
    return applySimState(next, sim);
  };

  function wireCustomerActions(): void {
    root.querySelectorAll<HTMLButtonElement>("button[data-action]").forEach((button) => {
      button.addEventListener("click", () => void onAction(button));
    });
  }

  async function onAction(button: HTMLButtonElement): Promise<void> {
    const action = button.dataset.action;
    try {
      if (action === "override") {
        const signalId = button.dataset.signal!;
        update(beginOverride(state, signalId));
        try {
          await api.override(signalId);
          update(overrideSucceeded(state, signalId));
        } catch (err) {
          update(overrideFailed(state, err instanceof ApiError ? err.message : String(err)));
        }
        update(await refresh());
      } else if (action === "subscribe") {
        await api.subscribe(button.dataset.programme!);
        update(await refresh());
      } else if (action === "unsubscribe") {
        await api.unsubscribe(button.dataset.subscription!);
        update(await refresh());
      }
    } catch (err) {
      update(setInlineError(state, err instanceof ApiError ? err.message : String(err)));
    }
  }

  try {
    update(await refresh());
  } catch (err) {
    renderLogin(err instanceof ApiError ? err.message : String(err));
    return;
  }

  const stream = new StreamClient(api.baseUrl, api.authToken, {
    onFrame: (frame) => {
      update(applyStreamEvent(state, frame.event));
      if (frame.event.type === "signal_response" || frame.event.type === "incentive_credited") {
        void refresh().then(update);
      }
    },
    onStatus: (status) => update(applyStreamStatus(state, status)),
  });
  void stream.run();

  // the slot clock advances without events for quiet customers: poll it
  setInterval(() => {
    void api.simState().then((sim) => update(applySimState(state, sim)));
  }, 1000);
}

async function runOperator(api: ApiClient): Promise<void> {
  let state: OperatorState = initialOperatorState();
  let segmentIds: string[] = [];

  const update = (next: OperatorState): void => {
    state = next;
    root.innerHTML = renderOperatorView(state);
    root.querySelector<HTMLButtonElement>("button[data-action=resume]")?.addEventListener(
      "click",
      () => void api.resume().then(refreshAll),
    );
  };

  async function refreshAll(): Promise<void> {
    if (segmentIds.length === 0) {
      const metrics = await api.metrics();
      segmentIds = Object.keys(metrics.segments ?? {}).sort();
    }
    const [requests, sim] = await Promise.all([api.requests(), api.simState()]);
    const segments = await Promise.all(segmentIds.map((sid) => api.segmentLoad(sid)));
    update(applyOperatorData(state, segments, requests.requests, sim));
  }

  try {
    await refreshAll();
  } catch (err) {
    renderLogin(err instanceof ApiError ? err.message : String(err));
    return;
  }

  const stream = new StreamClient(api.baseUrl, api.authToken, {
    onFrame: (frame) => {
      if (operatorRefreshWorthy(frame.event)) void refreshAll();
    },
    onStatus: (status) => update({ ...state, streamStatus: status }),
  });
  void stream.run();
  setInterval(() => void refreshAll(), 1500);
}

renderLogin();
