// View state and reducers. Pure data in, pure data out: every fact shown in
// the console originates from an API response or a stream event, and
// reloading the page rebuilds identical state from API reads alone.

import type {
  Programme,
  RequestRow,
  ScheduleResponse,
  SegmentLoad,
  SignalCard,
  SignalsResponse,
  SimState,
  StreamEvent,
  Subscription,
} from "./types.js";
import type { StreamStatus } from "./sse.js";

export interface CustomerState {
  customerId: string;
  programmes: Programme[];
  eligible: boolean;
  subscription: Subscription | null;
  balanceCt: number;
  signals: SignalCard[]; // newest first
  schedule: ScheduleResponse | null;
  sim: SimState | null;
  streamStatus: StreamStatus;
  overrideInFlight: string | null;
  inlineError: string | null;
}

export function initialCustomerState(customerId: string): CustomerState {
  return {
    customerId,
    programmes: [],
    eligible: false,
    subscription: null,
    balanceCt: 0,
    signals: [],
    schedule: null,
    sim: null,
    streamStatus: "connecting",
    overrideInFlight: null,
    inlineError: null,
  };
}

export function applyProgrammes(state: CustomerState, programmes: Programme[]): CustomerState {
  return { ...state, programmes };
}

export function applySignalsResponse(state: CustomerState, resp: SignalsResponse): CustomerState {
  const signals = [...resp.signals].sort((a, b) => b.issued_slot - a.issued_slot || (a.signal_id < b.signal_id ? -1 : 1));
  return {
    ...state,
    eligible: resp.eligible,
    subscription: resp.subscription,
    balanceCt: resp.balance_ct,
    signals,
  };
}

export function applySchedule(state: CustomerState, schedule: ScheduleResponse): CustomerState {
  return { ...state, schedule };
}

export function applySimState(state: CustomerState, sim: SimState): CustomerState {
  return { ...state, sim };
}

export function applyStreamStatus(state: CustomerState, status: StreamStatus): CustomerState {
  return { ...state, streamStatus: status };
}

function upsertSignal(signals: SignalCard[], card: SignalCard): SignalCard[] {
  const rest = signals.filter((s) => s.signal_id !== card.signal_id);
  return [card, ...rest];
}

/** Folds one broker event into the view; unknown topics are ignored. */
export function applyStreamEvent(state: CustomerState, event: StreamEvent): CustomerState {
  if (event.topic === `signals.${state.customerId}` && event.type === "dsm_signal") {
    const p = event.payload as unknown as Omit<SignalCard, "status" | "planned_delta" | "credited_ct">;
    const card: SignalCard = {
      ...p,
      status: "pending",
      planned_delta: { start_slot: 0, values_mw: [] },
      credited_ct: null,
    };
    return { ...state, signals: upsertSignal(state.signals, card) };
  }
  if (event.topic === `responses.${state.customerId}` && event.type === "signal_response") {
    const signalId = event.payload.signal_id as string;
    const signals = state.signals.map((s) =>
      s.signal_id === signalId
        ? {
            ...s,
            status: event.payload.status as SignalCard["status"],
            planned_delta: event.payload.planned_delta as SignalCard["planned_delta"],
          }
        : s,
    );
    return { ...state, signals };
  }
  if (event.topic === `credits.${state.customerId}` && event.type === "incentive_credited") {
    const signalId = event.payload.signal_id as string;
    const credit = event.payload.credit_ct as number;
    const signals = state.signals.map((s) =>
      s.signal_id === signalId ? { ...s, credited_ct: credit } : s,
    );
    return { ...state, balanceCt: state.balanceCt + credit, signals };
  }
  return state;
}

export function beginOverride(state: CustomerState, signalId: string): CustomerState {
  return { ...state, overrideInFlight: signalId, inlineError: null };
}

export function overrideSucceeded(state: CustomerState, signalId: string): CustomerState {
  const signals = state.signals.map((s) =>
    s.signal_id === signalId ? { ...s, status: "overridden" as const } : s,
  );
  return { ...state, overrideInFlight: null, signals };
}

export function overrideFailed(state: CustomerState, message: string): CustomerState {
  return { ...state, overrideInFlight: null, inlineError: message };
}

export function setInlineError(state: CustomerState, message: string | null): CustomerState {
  return { ...state, inlineError: message };
}

/** A signal can still be vetoed while any window slot remains unmetered. */
export function overridable(card: SignalCard, sim: SimState | null): boolean {
  if (card.status === "overridden") return false;
  const end = card.requested.start_slot + card.requested.values_mw.length;
  const now = sim ? sim.slot : 0;
  return now < end;
}

// ---------------------------------------------------------------------------
// operator side
// ---------------------------------------------------------------------------

export interface OperatorState {
  segments: SegmentLoad[];
  requests: RequestRow[];
  sim: SimState | null;
  streamStatus: StreamStatus;
}

export function initialOperatorState(): OperatorState {
  return { segments: [], requests: [], sim: null, streamStatus: "connecting" };
}

export function applyOperatorData(
  state: OperatorState,
  segments: SegmentLoad[],
  requests: RequestRow[],
  sim: SimState,
): OperatorState {
  return { ...state, segments, requests, sim };
}

/** Market events that should trigger an operator data refresh. */
export function operatorRefreshWorthy(event: StreamEvent): boolean {
  return (
    event.topic.startsWith("requests.") ||
    event.topic === "market.clearings" ||
    event.topic === "market.settlements" ||
    event.type === "meter_reading"
  );
}
