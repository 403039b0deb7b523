// Wire types, mirroring the server's canonical JSON encodings.

export interface ProfileJson {
  start_slot: number;
  values_mw: number[];
}

export interface Programme {
  programme_id: string;
  manager_id: string;
  tariff_ct_per_kwh: number[];
  incentive_rate_ct_per_kwh: number;
  max_signals_per_day: number;
  description: string;
}

export interface Subscription {
  subscription_id: string;
  customer_id: string;
  programme_id: string;
  start_slot: number;
  status: "active" | "cancelled";
}

export type SignalStatus = "pending" | "auto_accepted" | "partially_met" | "overridden";

export interface SignalCard {
  signal_id: string;
  manager_id: string;
  customer_id: string;
  direction: "decrease" | "increase";
  requested: ProfileJson;
  incentive_rate_ct_per_kwh: number;
  issued_slot: number;
  status: SignalStatus;
  planned_delta: ProfileJson;
  credited_ct: number | null;
}

export interface SignalsResponse {
  customer_id: string;
  eligible: boolean;
  subscription: Subscription | null;
  balance_ct: number;
  signals: SignalCard[];
}

export interface ScheduleResponse {
  customer_id: string;
  devices: Record<string, number[]>;
  pv_mw: number[];
  net_mw: number[];
}

export interface SimState {
  run_id: string;
  slot: number;
  phase: string;
  horizon_slots: number;
  paused: boolean;
  finished: boolean;
  mode: string;
}

export interface SegmentLoad {
  segment_id: string;
  capacity_mw: number;
  net_mw: number[];
  metered_through_slot: number;
}

export interface RequestRow {
  request_id: string;
  requester_id: string;
  requester_role: string;
  direction: string;
  scope: string;
  target: ProfileJson;
  state: string;
  clearing?: {
    selected: string[];
    total_price_ct: number;
    feasible: boolean;
    method: string;
  };
  acceptance?: {
    decision: string;
    clearing_cost_ct: number | null;
    exchange_cost_ct: number | null;
    recorded_cost_ct: number | null;
  };
  settlement?: {
    payouts_ct: Record<string, number>;
    fulfillment_ppm: Record<string, number>;
  };
}

export interface StreamEvent {
  topic: string;
  seq: number;
  t_slot: number;
  phase: string;
  publisher: string;
  type: string;
  payload: Record<string, unknown>;
}

export interface StreamFrame {
  id: number;
  event: StreamEvent;
}
