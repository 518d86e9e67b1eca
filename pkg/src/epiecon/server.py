"""JSON-over-HTTP scenario service.

Endpoints:
  GET  /api/panel     panel summary
  GET  /api/frontier  cached 255-scenario sweep with the non-dominated set
  POST /api/simulate  baseline vs scenario trajectories for one mask

Every response carries `schema_version`. The trained bundle is shared
read-only across requests; simulations run inside a bounded worker
semaphore. If a UI directory is given its files are served at the root.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import date, timedelta
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import policy as policy_lab
from .errors import EpieconError
from .panel import N_CONTAINMENT, Panel
from .simulate import ModelBundle

SCHEMA_VERSION = 1

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".svg": "image/svg+xml",
    ".map": "application/json; charset=utf-8",
}


@dataclass
class AppState:
    bundle: ModelBundle
    panel: Panel
    panel_hash: str
    frontier_dates: list
    horizon: int = 14
    workers: int = 4
    ui_dir: Path | None = None

    def __post_init__(self):
        self._sim_slots = threading.Semaphore(self.workers)
        self._frontier_lock = threading.Lock()
        self._frontier_payload = None

    # -- payload builders ---------------------------------------------------

    def panel_summary(self) -> dict:
        p = self.panel
        return {
            "schema_version": SCHEMA_VERSION,
            "panel_hash": self.panel_hash,
            "start": p.dates[0].isoformat(),
            "end": p.dates[-1].isoformat(),
            "days": len(p),
            "population": self.bundle.population,
            "cum_confirmed_end": float(p.cum_confirmed[-1]),
            "unemployment_end": float(p.unemployment[-1]),
            "simulate_min_start": (p.dates[0] + timedelta(days=4 * 7)).isoformat(),
        }

    def frontier_payload(self) -> dict:
        with self._frontier_lock:
            if self._frontier_payload is None:
                outcomes = policy_lab.run_policy_sweep(
                    self.bundle, self.panel, self.frontier_dates,
                    horizon=self.horizon, workers=1)
                frontier_bits = {p.mask_bits for p in policy_lab.efficient_frontier(outcomes)}
                self._frontier_payload = {
                    "schema_version": SCHEMA_VERSION,
                    "panel_hash": self.panel_hash,
                    "horizon": self.horizon,
                    "start_dates": [d.isoformat() for d in self.frontier_dates],
                    "points": [
                        {"mask": bits, "d_cases": out.d_cases,
                         "d_employment_pp": out.d_employment,
                         "on_frontier": bits in frontier_bits}
                        for bits, out in sorted(outcomes.items())
                    ],
                }
            return self._frontier_payload

    def simulate_payload(self, body: dict) -> dict:
        open_mask = body.get("open_mask")
        if (not isinstance(open_mask, list) or len(open_mask) != N_CONTAINMENT
                or not all(isinstance(b, bool) for b in open_mask)):
            raise ValueError(f"open_mask must be a list of {N_CONTAINMENT} booleans")
        try:
            start = date.fromisoformat(str(body.get("start_date")))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"bad start_date: {exc}") from exc
        horizon = body.get("horizon")
        if not isinstance(horizon, int) or horizon < 1:
            raise ValueError("horizon must be an integer >= 1")
        blm_scale = body.get("blm_scale", 1.0)
        if not isinstance(blm_scale, (int, float)) or blm_scale < 0:
            raise ValueError("blm_scale must be a number >= 0")

        start_index = self.panel.index_of(start)
        closed = tuple(False for _ in range(N_CONTAINMENT))
        with self._sim_slots:
            baseline = policy_lab._run_window(
                self.bundle, self.panel, start_index, horizon, closed, blm_scale=1.0)
            scenario = policy_lab._run_window(
                self.bundle, self.panel, start_index, horizon, tuple(open_mask),
                blm_scale=float(blm_scale))
        return {
            "schema_version": SCHEMA_VERSION,
            "panel_hash": self.panel_hash,
            "open_mask": open_mask,
            "start_date": start.isoformat(),
            "horizon": horizon,
            "blm_scale": float(blm_scale),
            "baseline": baseline.to_payload(),
            "scenario": scenario.to_payload(),
            "d_cases": float(scenario.cum_confirmed[-1] - baseline.cum_confirmed[-1]),
            "d_employment_pp": float(baseline.unemployment[-1] - scenario.unemployment[-1]),
        }


class Handler(BaseHTTPRequestHandler):
    app: AppState = None  # set by serve()

    def log_message(self, fmt, *args):  # tests stay quiet
        pass

    def _send_json(self, status: int, payload: dict):
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _send_error_json(self, status: int, message: str):
        self._send_json(status, {"schema_version": SCHEMA_VERSION,
                                 "error": {"message": message}})

    def do_GET(self):
        if self.path == "/api/panel":
            self._send_json(200, self.app.panel_summary())
        elif self.path == "/api/frontier":
            try:
                self._send_json(200, self.app.frontier_payload())
            except EpieconError as exc:
                self._send_error_json(500, str(exc))
        elif self.app.ui_dir is not None:
            self._send_static()
        else:
            self._send_error_json(404, f"unknown path {self.path}")

    def _send_static(self):
        rel = self.path.lstrip("/") or "index.html"
        target = (self.app.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.app.ui_dir.resolve())) or not target.is_file():
            self._send_error_json(404, f"unknown path {self.path}")
            return
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         CONTENT_TYPES.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        if self.path != "/api/simulate":
            self._send_error_json(404, f"unknown path {self.path}")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(body, dict):
                raise ValueError("request body must be a JSON object")
        except (ValueError, json.JSONDecodeError) as exc:
            self._send_error_json(400, f"malformed request body: {exc}")
            return
        try:
            payload = self.app.simulate_payload(body)
        except ValueError as exc:
            self._send_error_json(400, str(exc))
            return
        except EpieconError as exc:
            self._send_error_json(500, f"simulation failed: {exc}")
            return
        self._send_json(200, payload)


def make_server(bundle: ModelBundle, panel: Panel, panel_hash: str, host: str,
                port: int, workers: int = 4, ui_dir=None,
                frontier_dates=None, horizon: int = 14) -> ThreadingHTTPServer:
    if frontier_dates is None:
        frontier_dates = [panel.dates[len(panel) // 2]]
    app = AppState(bundle, panel, panel_hash, frontier_dates, horizon=horizon,
                   workers=workers, ui_dir=Path(ui_dir) if ui_dir else None)
    handler = type("BoundHandler", (Handler,), {"app": app})
    return ThreadingHTTPServer((host, port), handler)


def serve(bundle, panel, panel_hash, host, port, workers=4, ui_dir=None,
          frontier_dates=None, horizon: int = 14) -> None:
    httpd = make_server(bundle, panel, panel_hash, host, port, workers, ui_dir,
                        frontier_dates, horizon)
    print(f"serving on http://{httpd.server_address[0]}:{httpd.server_address[1]}")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
