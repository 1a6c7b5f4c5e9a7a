"""HTTP control plane: start activities, stream their events, answer approval
points, submit runtime commands, and fetch profiles and reports.

One engine thread runs per activity. Events stream as line-delimited JSON
over a persistent response; a client resumes by passing the last sequence
number it saw. Command gate decisions are computed at submit time, so the
HTTP response always matches the decision event that later appears in the
stream.
"""

import threading
from pathlib import Path
from typing import Dict, Iterator, List, Optional

from .dependencies import detect_conflicts
from .engine import ApprovalState, CommandQueue, EngineRun, apply_command, event_line
from .ontology import Phase
from .profiles import (
    Category,
    ProfileError,
    SystemProfile,
    builtin_profile,
    builtin_profiles,
    llm_builtin_profiles,
    profile_from_dict,
    profile_to_dict,
    validate,
)
from .reporting import (
    Dimension,
    distribution_to_dict,
    level_distribution,
    render_bars,
    render_radar,
    render_table,
)
from .scenario import (
    Command,
    GateDecision,
    InvalidScenario,
    Scenario,
    command_from_dict,
    scenario_from_dict,
)


class UnknownActivity(Exception):
    pass


class ActivityRuntime:
    """A live (or finished) activity plus its thread and event buffer."""

    def __init__(self, activity_id: str, scenario: Scenario, artefact_dir: str = "."):
        self.id = activity_id
        self.scenario = scenario
        self.queue = CommandQueue()
        self.condition = threading.Condition()
        self.events: List[dict] = []
        self.done = False
        self.engine = EngineRun(
            scenario,
            activity_id=activity_id,
            command_queue=self.queue,
            event_sink=self._sink,
            artefact_dir=artefact_dir,
        )
        self.thread = threading.Thread(target=self._run, name=f"engine-{activity_id}", daemon=True)

    def start(self) -> None:
        self.thread.start()

    def _sink(self, event: dict) -> None:
        with self.condition:
            self.events.append(event)
            self.condition.notify_all()

    def _run(self) -> None:
        try:
            self.engine.run()
        finally:
            with self.condition:
                self.done = True
                self.condition.notify_all()

    # -- queries --

    def status(self) -> str:
        outcome = self.engine.activity.outcome
        if outcome is not None:
            return outcome.status.value
        return self.engine.activity.phase.value

    def handle(self) -> dict:
        pending = [
            self._approval_dict(a)
            for a in self.engine.approvals.values()
            if a.state is ApprovalState.PENDING
        ]
        return {
            "id": self.id,
            "status": self.status(),
            "action_count": len(self.engine.activity.action_log),
            "pending_approvals": pending,
            "scenario": {
                "goal": self.scenario.goal.text,
                "protocol": self.scenario.protocol.kind.value,
            },
        }

    def approvals_list(self) -> List[dict]:
        return [self._approval_dict(a) for a in self.engine.approvals.values()]

    @staticmethod
    def _approval_dict(approval) -> dict:
        preview = None
        if approval.action_preview is not None:
            from .engine import action_to_dict

            preview = action_to_dict(approval.action_preview)
        return {
            "id": approval.id,
            "state": approval.state.value,
            "juncture": approval.juncture.value,
            "target_aspect": approval.target_aspect.value,
            "created_at": approval.created_at,
            "action_preview": preview,
        }

    def submit(self, command: Command) -> GateDecision:
        """Gate the command and enqueue it for the engine loop.

        A command against a terminal activity returns a rejection rather than
        an error; nothing is enqueued in that case.
        """
        with self.condition:
            terminal = self.engine.activity.phase is Phase.TERMINAL or self.done
            pending = [
                a.id
                for a in self.engine.approvals.values()
                if a.state is ApprovalState.PENDING
            ]
        decision = apply_command(
            command,
            self.scenario.aspect_levels,
            pending_approvals=pending,
            terminal=terminal,
        )
        if not terminal:
            self.queue.put(command, decision)
        return decision

    def stream(self, from_seq: int = 0) -> Iterator[str]:
        """Replay events with seq >= from_seq, then live-tail until terminal."""
        index = 0
        while True:
            with self.condition:
                while index >= len(self.events) and not self.done:
                    self.condition.wait(timeout=0.1)
                if index >= len(self.events) and self.done:
                    return
                batch = self.events[index:]
                index = len(self.events)
            for event in batch:
                if event["seq"] >= from_seq:
                    yield event_line(event) + "\n"


class WorkbenchService:
    """Registry of activity runtimes plus profile and report lookups."""

    def __init__(self, artefact_dir: str = "."):
        self._runtimes: Dict[str, ActivityRuntime] = {}
        self._counter = 0
        self._lock = threading.Lock()
        self.artefact_dir = artefact_dir

    def start_activity(self, scenario_doc: dict) -> dict:
        scenario = scenario_from_dict(scenario_doc)
        with self._lock:
            self._counter += 1
            activity_id = f"act-{self._counter}"
        runtime = ActivityRuntime(activity_id, scenario, artefact_dir=self.artefact_dir)
        with self._lock:
            self._runtimes[activity_id] = runtime
        runtime.start()
        return runtime.handle()

    def runtime(self, activity_id: str) -> ActivityRuntime:
        runtime = self._runtimes.get(activity_id)
        if runtime is None:
            raise UnknownActivity(f"no activity {activity_id!r}")
        return runtime

    def handles(self) -> List[dict]:
        return [r.handle() for r in self._runtimes.values()]


def create_app(service: Optional[WorkbenchService] = None):
    """Build the FastAPI application around a service instance."""
    from fastapi import FastAPI, HTTPException, Query, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import PlainTextResponse, Response, StreamingResponse

    service = service or WorkbenchService()
    app = FastAPI(title="aamatrix control service", version="0.1.0")
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def _runtime(activity_id: str) -> ActivityRuntime:
        try:
            return service.runtime(activity_id)
        except UnknownActivity as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/activities")
    async def post_activity(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="request body must be JSON")
        try:
            return service.start_activity(body)
        except InvalidScenario as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/activities")
    def list_activities():
        return service.handles()

    @app.get("/activities/{activity_id}")
    def get_activity(activity_id: str):
        return _runtime(activity_id).handle()

    @app.get("/activities/{activity_id}/events")
    def get_events(activity_id: str, frm: int = Query(default=0, alias="from")):
        runtime = _runtime(activity_id)
        return StreamingResponse(
            runtime.stream(from_seq=frm), media_type="application/x-ndjson"
        )

    @app.get("/activities/{activity_id}/approvals")
    def get_approvals(activity_id: str):
        return _runtime(activity_id).approvals_list()

    @app.post("/activities/{activity_id}/commands")
    async def post_command(activity_id: str, request: Request):
        runtime = _runtime(activity_id)
        try:
            body = await request.json()
            command = command_from_dict(body)
        except InvalidScenario as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except Exception:
            raise HTTPException(status_code=400, detail="request body must be JSON")
        decision = runtime.submit(command)
        return {"accepted": decision.accepted, "reason": decision.reason}

    @app.get("/profiles")
    def get_profiles():
        return [profile_to_dict(p) for p in builtin_profiles()]

    @app.post("/profiles/validate")
    async def post_validate(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="request body must be JSON")
        try:
            profile = profile_from_dict(body)
        except ProfileError as exc:
            return {"valid": False, "issues": [["document", str(exc)]]}
        report = validate(profile)
        return {"valid": report.valid, "issues": [list(i) for i in report.issues]}

    @app.get("/profiles/{name}/conflicts")
    def get_conflicts(name: str):
        try:
            profile = builtin_profile(name)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return [c.to_dict() for c in detect_conflicts(profile)]

    @app.get("/reports/radar/{name}.svg")
    def get_radar(name: str):
        try:
            profile = builtin_profile(name)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return Response(content=render_radar(profile), media_type="image/svg+xml")

    @app.get("/activities/{activity_id}/radar.svg")
    def get_activity_radar(activity_id: str):
        runtime = _runtime(activity_id)
        profile = SystemProfile(
            name=activity_id,
            category=Category.UNLABELED,
            aspects=dict(runtime.scenario.aspect_levels),
        )
        return Response(content=render_radar(profile), media_type="image/svg+xml")

    @app.get("/reports/bars/{dimension}.svg")
    def get_bars(dimension: str, population: str = "llm"):
        try:
            dim = Dimension(dimension.capitalize())
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown dimension {dimension!r}")
        profiles = builtin_profiles() if population == "all" else llm_builtin_profiles()
        return Response(
            content=render_bars(level_distribution(profiles, dim)),
            media_type="image/svg+xml",
        )

    @app.get("/reports/distribution/{dimension}.json")
    def get_distribution(dimension: str, population: str = "llm"):
        try:
            dim = Dimension(dimension.capitalize())
        except ValueError:
            raise HTTPException(status_code=404, detail=f"unknown dimension {dimension!r}")
        profiles = builtin_profiles() if population == "all" else llm_builtin_profiles()
        return distribution_to_dict(level_distribution(profiles, dim))

    @app.get("/reports/table.md")
    def get_table():
        return PlainTextResponse(
            render_table(builtin_profiles()), media_type="text/markdown"
        )

    console_dir = Path(__file__).resolve().parents[2] / "frontend"
    if (console_dir / "index.html").is_file():
        from fastapi.staticfiles import StaticFiles

        app.mount(
            "/console", StaticFiles(directory=console_dir, html=True), name="console"
        )

    return app


def serve(host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port, log_level="warning")
