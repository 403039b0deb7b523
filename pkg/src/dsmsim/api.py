"""HTTP+JSON service over a running simulation.

A thin façade: every handler authenticates a bearer token, checks the role,
and calls straight into the owning module under the simulation lock. State
never lives here. The /api/stream endpoint pushes broker events (one JSON
event per SSE frame, `id:` = global log cursor) filtered by what the caller
is allowed to subscribe to; reconnect with ?cursor= to resume.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlparse

from . import b2b as b2b_mod
from . import b2c as b2c_mod
from .core import Direction, PowerProfile
from .eecs import SignalNotFoundError, SignalWindowElapsedError
from .platform import (
    AccessError,
    AuthenticationError,
    NotFoundError,
    Principal,
    Role,
    authorize,
    canonical_json,
)
from .scenario import Scenario
from .simulation import Simulation


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message


def _json_error(status, message):
    return ApiError(status, message)


class SimulationService:
    """Owns the simulation thread and the interactive override gate."""

    def __init__(self, scenario: Scenario, seed=None, mode="interactive", pause_seconds=0.2):
        self.mode = mode
        self.pause_seconds = pause_seconds
        self._resume = threading.Event()
        self._paused = threading.Event()
        gate = self._gate if mode == "interactive" else None
        self.sim = Simulation(scenario, seed=seed, override_gate=gate)
        self._thread: Optional[threading.Thread] = None

    def _gate(self, sim: Simulation) -> None:
        self._resume.clear()
        self._paused.set()
        self._resume.wait(timeout=self.pause_seconds)
        self._paused.clear()

    def start(self) -> None:
        self._thread = threading.Thread(target=self.sim.run, name="sim-clock", daemon=True)
        self._thread.start()

    def run_to_completion(self) -> None:
        self.sim.run()

    def resume(self) -> None:
        self._resume.set()

    def join(self, timeout=None):
        if self._thread:
            self._thread.join(timeout)

    @property
    def paused(self) -> bool:
        return self._paused.is_set()

    def state(self) -> dict:
        sim = self.sim
        return {
            "run_id": sim.run_id,
            "slot": sim.clock.slot,
            "phase": sim.clock.phase,
            "horizon_slots": sim.grid.horizon_slots,
            "paused": self.paused,
            "finished": sim.finished,
            "mode": self.mode,
        }


OPERATOR_ROLES = (Role.ADMIN, Role.GRID_OPERATOR, Role.RETAILER, Role.DSM_MANAGER)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service: SimulationService = None  # set by serve()

    # -- plumbing ---------------------------------------------------------

    def log_message(self, *args):  # tests do not want request noise
        pass

    def _send_json(self, status: int, obj) -> None:
        body = (canonical_json(obj) + "\n").encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        if not self._raw_body:
            return {}
        try:
            return json.loads(self._raw_body)
        except json.JSONDecodeError:
            raise _json_error(400, "request body is not valid JSON")

    def _principal(self) -> Principal:
        header = self.headers.get("Authorization") or ""
        if not header.startswith("Bearer "):
            raise _json_error(401, "missing bearer token")
        try:
            return self.service.sim.identity.authenticate(header[len("Bearer ") :])
        except AuthenticationError:
            raise _json_error(401, "authentication failed")

    def _require_role(self, principal: Principal, *roles: Role) -> None:
        if principal.role not in roles:
            raise _json_error(403, f"forbidden for role {principal.role.value}")

    def _customer_scope(self, principal: Principal, customer_id: str) -> None:
        if principal.role is Role.CUSTOMER and principal.actor_id != customer_id:
            raise _json_error(403, "customers may only access their own data")
        if principal.role not in (Role.CUSTOMER, Role.ADMIN, Role.DSM_MANAGER):
            raise _json_error(403, f"forbidden for role {principal.role.value}")

    # -- routing -----------------------------------------------------------

    def do_GET(self):
        self._route("GET")

    def do_POST(self):
        self._route("POST")

    def do_DELETE(self):
        self._route("DELETE")

    def _route(self, method: str) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        # drain the body eagerly so early error responses keep the
        # keep-alive connection framing intact
        self._raw_body = self.rfile.read(int(self.headers.get("Content-Length") or 0))
        try:
            if not parts or parts[0] != "api":
                raise _json_error(404, "unknown path")
            handler = getattr(self, f"_{method.lower()}_{'_'.join(parts[1:2])}", None)
            if handler is None:
                raise _json_error(404, "unknown path")
            handler(parts[1:], parse_qs(url.query))
        except ApiError as e:
            self._send_json(e.status, {"error": e.message})
        except AuthenticationError:
            self._send_json(401, {"error": "authentication failed"})
        except AccessError as e:
            self._send_json(403, {"error": str(e)})
        except (NotFoundError, SignalNotFoundError) as e:
            self._send_json(404, {"error": f"not found: {e}"})
        except (b2c_mod.ConflictError, b2c_mod.DuplicateError, b2b_mod.StateError,
                b2b_mod.DuplicateError, SignalWindowElapsedError) as e:
            self._send_json(409, {"error": str(e)})
        except (b2c_mod.ProgrammeValidationError, b2b_mod.RequestValidationError,
                b2b_mod.DeadlineError, ValueError) as e:
            self._send_json(400, {"error": str(e)})
        except BrokenPipeError:
            pass

    # -- customer surface -----------------------------------------------------

    def _get_programmes(self, parts, query):
        sim = self.service.sim
        with sim.lock:
            items = [p.to_json_obj() for p in sim.b2c.list_programmes()]
        self._send_json(200, {"programmes": items})

    def _post_subscriptions(self, parts, query):
        principal = self._principal()
        body = self._read_body()
        programme_id = body.get("programme_id")
        if not programme_id:
            raise _json_error(400, "programme_id required")
        sim = self.service.sim
        with sim.lock:
            sub = sim.b2c.subscribe(principal, programme_id, start_slot=sim.clock.slot)
        self._send_json(201, sub.to_json_obj())

    def _delete_subscriptions(self, parts, query):
        if len(parts) < 2:
            raise _json_error(404, "subscription id required")
        principal = self._principal()
        sim = self.service.sim
        with sim.lock:
            sub = sim.b2c.unsubscribe(principal, parts[1])
        self._send_json(200, sub.to_json_obj())

    def _get_customers(self, parts, query):
        # /api/customers/{id}/(devices|schedule|signals)
        if len(parts) < 3:
            raise _json_error(404, "unknown path")
        principal = self._principal()
        cid, what = parts[1], parts[2]
        self._customer_scope(principal, cid)
        sim = self.service.sim
        if cid not in sim.eecs:
            raise _json_error(404, f"unknown customer {cid}")
        site = sim.eecs[cid]
        with sim.lock:
            if what == "devices":
                records = sim.registry.for_customer(cid)
                out = [{"device_id": r.device_id, "kind": r.device.kind} for r in records]
                self._send_json(200, {"customer_id": cid, "devices": out})
            elif what == "schedule":
                self._send_json(200, site.schedule_json())
            elif what == "signals":
                sub = sim.b2c.active_subscription(cid)
                signals = []
                for sid in sorted(site.records):
                    rec = site.records[sid]
                    credit = next(
                        (e.credit_ct for e in sim.b2c.ledger() if e.signal_id == sid), None
                    )
                    signals.append(
                        {
                            **rec.signal.to_json_obj(),
                            "status": rec.status.value,
                            "planned_delta": rec.planned_delta.to_json_obj(),
                            "credited_ct": credit,
                        }
                    )
                self._send_json(
                    200,
                    {
                        "customer_id": cid,
                        "eligible": sub is not None,
                        "subscription": sub.to_json_obj() if sub else None,
                        "balance_ct": sim.b2c.balance_ct(cid),
                        "signals": signals,
                    },
                )
            else:
                raise _json_error(404, "unknown path")

    def _post_signals(self, parts, query):
        # /api/signals/{id}/override
        if len(parts) < 3 or parts[2] != "override":
            raise _json_error(404, "unknown path")
        principal = self._principal()
        signal_id = parts[1]
        sim = self.service.sim
        with sim.lock:
            owner = None
            for cid in sorted(sim.eecs):
                if signal_id in sim.eecs[cid].records:
                    owner = cid
                    break
            if owner is None:
                raise _json_error(404, f"unknown signal {signal_id}")
            if principal.role is Role.CUSTOMER and principal.actor_id != owner:
                raise _json_error(403, "customers may only override their own signals")
            if principal.role not in (Role.CUSTOMER, Role.ADMIN):
                raise _json_error(403, f"forbidden for role {principal.role.value}")
            if sim.clock.phase != "override" or not self.service.paused:
                raise _json_error(409, "overrides are accepted during the override pause only")
            rec = sim.override_now(owner, signal_id)
            self._send_json(
                200,
                {
                    "signal_id": signal_id,
                    "status": rec.status.value,
                    "customer_id": owner,
                },
            )

    # -- market surface -----------------------------------------------------

    def _post_requests(self, parts, query):
        principal = self._principal()
        sim = self.service.sim
        if len(parts) >= 3 and parts[2] == "offers":
            self._require_role(principal, Role.DSM_MANAGER)
            body = self._read_body()
            supply = PowerProfile.from_kw(
                sim.grid, int(body["supply"]["start_slot"]), body["supply"]["values_kw"]
            )
            with sim.lock:
                sim.queue_offer(
                    {
                        "principal": principal,
                        "request_id": parts[1],
                        "supply": supply,
                        "price_ct": int(body["price_ct"]),
                    }
                )
            self._send_json(202, {"queued": True, "request_id": parts[1]})
            return
        self._require_role(principal, Role.RETAILER, Role.GRID_OPERATOR)
        body = self._read_body()
        try:
            direction = Direction(body.get("direction", "decrease"))
            target = PowerProfile.from_kw(
                sim.grid, int(body["target"]["start_slot"]), body["target"]["values_kw"]
            )
        except (KeyError, TypeError) as e:
            raise _json_error(400, f"bad request body: {e}")
        budget = body.get("budget_cap_ct")
        rid = sim.queue_request(
            {
                "principal": principal,
                "direction": direction,
                "scope": str(body.get("scope", "")),
                "target": target,
                "budget_cap_ct": None if budget is None else int(budget),
            }
        )
        self._send_json(202, {"queued": True, "request_id": rid})

    def _get_requests(self, parts, query):
        principal = self._principal()
        self._require_role(principal, *OPERATOR_ROLES)
        sim = self.service.sim
        with sim.lock:
            if len(parts) >= 2:
                req = sim.b2b.get(parts[1])
                self._send_json(200, req.to_json_obj())
            else:
                self._send_json(200, {"requests": [r.to_json_obj() for r in sim.b2b.all_requests()]})

    def _get_segments(self, parts, query):
        # /api/segments/{id}/load
        if len(parts) < 3 or parts[2] != "load":
            raise _json_error(404, "unknown path")
        principal = self._principal()
        self._require_role(principal, *OPERATOR_ROLES)
        sim = self.service.sim
        sid = parts[1]
        seg = next((s for s in sim.scenario.segments if s.segment_id == sid), None)
        if seg is None:
            raise _json_error(404, f"unknown segment {sid}")
        with sim.lock:
            series = sim.segment_net_mw(sid)
            metered = min(sim.clock.slot, sim.grid.horizon_slots)
        self._send_json(
            200,
            {
                "segment_id": sid,
                "capacity_mw": seg.capacity_mw,
                "net_mw": series,
                "metered_through_slot": metered,
            },
        )

    def _get_metrics(self, parts, query):
        principal = self._principal()
        self._require_role(principal, *OPERATOR_ROLES)
        sim = self.service.sim
        from . import metrics as metrics_mod

        with sim.lock:
            if sim.metrics is not None:
                self._send_json(200, sim.metrics)
                return
            events = [e.to_json_obj() for e in sim.broker.log_events()]
        try:
            partial = metrics_mod.compute_metrics(events)
        except metrics_mod.LogError:
            partial = {"pending": True, "slot": sim.clock.slot}
        self._send_json(200, partial)

    # -- simulation control ---------------------------------------------------

    def _post_sim(self, parts, query):
        if len(parts) < 2 or parts[1] != "resume":
            raise _json_error(404, "unknown path")
        principal = self._principal()
        self._require_role(principal, *OPERATOR_ROLES)
        self.service.resume()
        self._send_json(200, self.service.state())

    def _get_sim(self, parts, query):
        if len(parts) < 2 or parts[1] != "state":
            raise _json_error(404, "unknown path")
        self._principal()
        self._send_json(200, self.service.state())

    # -- event stream -----------------------------------------------------------

    def _get_stream(self, parts, query):
        principal = self._principal()
        sim = self.service.sim
        cursor = int(query.get("cursor", ["0"])[0])
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-store")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        try:
            while True:
                events = sim.broker.wait_for_events(cursor, timeout=0.25)
                for i, event in enumerate(events):
                    index = cursor + i + 1
                    if not authorize(principal, event.topic, "subscribe"):
                        continue
                    frame = f"id: {index}\ndata: {canonical_json(event.to_json_obj())}\n\n"
                    self.wfile.write(frame.encode())
                cursor += len(events)
                self.wfile.flush()
                if sim.finished and cursor >= sim.broker.log_size():
                    self.wfile.write(b"event: end\ndata: {}\n\n")
                    self.wfile.flush()
                    return
        except (BrokenPipeError, ConnectionResetError):
            return


def serve(scenario: Scenario, port: int, seed=None, mode="interactive", pause_seconds=0.2):
    """Start the simulation and an HTTP server; returns (httpd, service)."""
    service = SimulationService(scenario, seed=seed, mode=mode, pause_seconds=pause_seconds)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    httpd = ThreadingHTTPServer(("127.0.0.1", port), handler)
    if mode == "batch":
        service.run_to_completion()
    else:
        service.start()
    return httpd, service
