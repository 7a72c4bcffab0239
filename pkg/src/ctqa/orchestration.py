"""The two pipelines: region-guided QA and full report generation.

A QA episode classifies the query, rewrites it for the routed region,
compresses the study once (cached), invokes exactly one region tool, and
renders the final answer through the answer template on the planner backend.
A report episode walks all ten regions in the fixed report order, encodes the
findings, retrieves exemplars, and makes one aggregation call. Every step is
recorded in the planner trace and the finished episode is appended to the
history log.
"""
from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field

from .adapters import AdapterRegistry, LoraAdapter, select_adapter
from .compression import CompressedVision, CompressionConfig, MoeParams, Projection, compress_volume
from .errors import (
    AdapterMissingError,
    BackendUnavailableError,
    TaskMismatchError,
    UnknownRegionError,
)
from .llm import LlmClient, LlmReply
from .memory import (
    EmbeddingClient,
    ExemplarStore,
    HistoryLog,
    HistoryRecord,
    QueryHub,
    Retrieved,
    encode_findings,
    retrieve_topk,
)
from .planner import Action, PlannerState, classify_task, rewrite_query, select_query, step
from .prompts import load_template, render
from .regions import REPORT_ORDER, RegionId, display_name
from .studies import StudyRepository

IMAGE_START = "<im_start>"
IMAGE_END = "<im_end>"


@dataclass(frozen=True)
class ReasoningRequest:
    task_text: str
    vision: CompressedVision
    region: RegionId
    adapter: LoraAdapter
    study_id: str

    def __post_init__(self):
        if self.adapter.region is not self.region:
            raise AdapterMissingError(
                f"adapter for {self.adapter.region} does not match request region {self.region}"
            )


@dataclass(frozen=True)
class GenerationResult:
    text: str
    token_logprobs: tuple[float, ...] | None
    backend_id: str


@dataclass(frozen=True)
class RegionFinding:
    region: RegionId
    question: str
    statement: str


@dataclass(frozen=True)
class QaResult:
    answer: str
    regions: tuple[RegionId, ...]
    trace_id: str
    state: PlannerState

    @property
    def region(self) -> RegionId:
        return self.regions[0]


@dataclass(frozen=True)
class ReportResult:
    report: str
    findings: tuple[RegionFinding, ...]
    exemplars: tuple[Retrieved, ...]
    trace_id: str
    state: PlannerState


def _vision_ref(study_id: str, vision: CompressedVision) -> dict:
    return {
        "study_id": study_id,
        "rows": int(vision.projected.shape[0]),
        "cols": int(vision.projected.shape[1]),
    }


def assemble_input(task_text: str, vision: CompressedVision, study_id: str) -> str:
    """Model input in the fixed order: task text, image start, vision, image end.

    The vision rows travel out of band (see the wire contract); the text
    carries a resolvable placeholder between the image markers.
    """
    ref = _vision_ref(study_id, vision)
    placeholder = f"<vision study={ref['study_id']} rows={ref['rows']} cols={ref['cols']}>"
    return f"{task_text}\n{IMAGE_START}{placeholder}{IMAGE_END}"


def invoke_region_tool(
    req: ReasoningRequest, llm: LlmClient, registry: AdapterRegistry
) -> GenerationResult:
    """One adapter-tagged backend call; records exactly one activation."""
    adapter = select_adapter(registry, req.region)
    if adapter is not req.adapter:
        raise AdapterMissingError(f"registry adapter for {req.region} is not the requested one")
    content = assemble_input(req.task_text, req.vision, req.study_id)
    reply: LlmReply = llm.chat(
        [{"role": "user", "content": content}],
        adapter_id=req.region.value,
        vision_ref=_vision_ref(req.study_id, req.vision),
    )
    if not reply.text:
        raise BackendUnavailableError(f"backend {reply.backend_id} returned empty text")
    return GenerationResult(
        text=reply.text, token_logprobs=reply.logprobs, backend_id=reply.backend_id
    )


def _ordered(regions) -> tuple[RegionId, ...]:
    return tuple(sorted(regions, key=REPORT_ORDER.index))


def _digest(*parts: str) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


@dataclass
class Engine:
    studies: StudyRepository
    moe: MoeParams
    projection: Projection
    compression_cfg: CompressionConfig
    registry: AdapterRegistry
    planner_llm: LlmClient
    region_llm: LlmClient
    embedder: EmbeddingClient
    exemplar_store: ExemplarStore | None = None
    history: HistoryLog | None = None
    hub: QueryHub = field(default_factory=QueryHub.default)
    template_dir: str | None = None
    retrieval_k: int = 3

    def __post_init__(self):
        self._compressed: dict[str, CompressedVision] = {}
        self._cache_lock = threading.Lock()
        self.cache_hits = 0
        self.cache_misses = 0
        self._trace_counter = 0
        self._counter_lock = threading.Lock()

    # -- shared plumbing ----------------------------------------------------

    def compressed(self, study_id: str) -> CompressedVision:
        """Per-study compression, computed at most once per engine."""
        with self._cache_lock:
            if study_id in self._compressed:
                self.cache_hits += 1
                return self._compressed[study_id]
        vf = self.studies.get(study_id)
        cv = compress_volume(vf, self.moe, self.compression_cfg, self.projection)
        with self._cache_lock:
            self._compressed.setdefault(study_id, cv)
            self.cache_misses += 1
        return cv

    def _next_trace_id(self) -> str:
        with self._counter_lock:
            self._trace_counter += 1
            return f"t-{self._trace_counter:06d}"

    def _trace_dict(self, trace_id: str, state: PlannerState) -> dict:
        return {
            "trace_id": trace_id,
            "actions": [{"kind": a.kind, "detail": a.detail} for a in state.trace],
        }

    def _log(self, kind: str, session: str, trace_id: str, state: PlannerState,
             inputs_digest: str, output: str) -> None:
        if self.history is None:
            return
        self.history.append(
            HistoryRecord(
                ts=time.time(),
                session=session,
                kind=kind,
                trace=self._trace_dict(trace_id, state),
                inputs_digest=inputs_digest,
                output=output,
            )
        )

    def _extract_answer(self, reply_text: str) -> str:
        marker = "Answer:"
        if marker in reply_text:
            return reply_text.split(marker, 1)[1].strip()
        return reply_text.strip()

    # -- region-guided question answering ------------------------------------

    def run_qa(self, query: str, study_id: str, session: str = "default") -> QaResult:
        trace_id = self._next_trace_id()
        state = PlannerState()
        self.hub.record_user_query(query)

        decision = classify_task(query, self.planner_llm, self.template_dir)
        if decision.task_type != "QA":
            raise TaskMismatchError(f"run_qa received a {decision.task_type} query: {query!r}")
        if not decision.target_regions:
            raise UnknownRegionError(f"no anatomical region identified in query: {query!r}")
        regions = _ordered(decision.target_regions)
        state = step(
            state,
            Action("classify", {"task_type": "QA", "target_regions": [r.value for r in regions],
                                "query": query}),
            env={"study_id": study_id, "session": session},
        )

        rewritten = {r: rewrite_query(query, r, self.planner_llm, self.template_dir) for r in regions}
        state = step(state, Action("normalize", {"rewritten": {r.value: q for r, q in rewritten.items()}}))

        vision = self.compressed(study_id)
        statements: dict[RegionId, str] = {}
        for region in regions:
            request = ReasoningRequest(
                task_text=rewritten[region],
                vision=vision,
                region=region,
                adapter=self.registry.get(region),
                study_id=study_id,
            )
            statements[region] = invoke_region_tool(request, self.region_llm, self.registry).text
        state = step(
            state,
            Action("dispatch", {"statements": {r.value: s for r, s in statements.items()},
                                "tool_calls": len(regions)}),
        )

        # Final answers are always standardized through the answer template on
        # the planner backend, one render per routed region.
        template = load_template("answer_generation", self.template_dir)
        answers = []
        for region in regions:
            prompt = render(
                template,
                {
                    "user_question": query,
                    "reference_question": rewritten[region],
                    "reference_answer": statements[region],
                },
            )
            reply = self.planner_llm.chat([{"role": "user", "content": prompt}])
            answers.append(self._extract_answer(reply.text))
        answer = "\n\n".join(answers)
        state = step(state, Action("answer", {"answer": answer, "renderer": "planner"}))

        self._log("qa", session, trace_id, state, _digest(query, study_id), answer)
        return QaResult(answer=answer, regions=regions, trace_id=trace_id, state=state)

    # -- report generation ----------------------------------------------------

    def run_report(self, study_id: str, session: str = "default") -> ReportResult:
        trace_id = self._next_trace_id()
        state = PlannerState()
        state = step(
            state,
            Action("classify", {"task_type": "Report", "target_regions": [], "source": "direct"}),
            env={"study_id": study_id, "session": session},
        )

        questions = {r: select_query(r, self.hub) for r in REPORT_ORDER}
        state = step(state, Action("normalize", {"questions": {r.value: q for r, q in questions.items()}}))

        vision = self.compressed(study_id)
        findings = []
        for region in REPORT_ORDER:
            request = ReasoningRequest(
                task_text=questions[region],
                vision=vision,
                region=region,
                adapter=self.registry.get(region),
                study_id=study_id,
            )
            result = invoke_region_tool(request, self.region_llm, self.registry)
            findings.append(RegionFinding(region=region, question=questions[region],
                                          statement=result.text))
        findings = tuple(findings)
        state = step(
            state,
            Action("dispatch", {"statements": {f.region.value: f.statement for f in findings},
                                "tool_calls": len(findings)}),
        )

        exemplars: tuple[Retrieved, ...] = ()
        if self.exemplar_store is not None and len(self.exemplar_store) > 0:
            query_vec = encode_findings([f.statement for f in findings], self.embedder)
            exemplars = tuple(retrieve_topk(query_vec, self.exemplar_store, self.retrieval_k))
            state = step(
                state,
                Action("aggregate", {"exemplar_indices": [e.index for e in exemplars],
                                     "similarities": [e.similarity for e in exemplars]}),
            )

        inputs_block = "\n".join(f"{display_name(f.region)}: {f.statement}" for f in findings)
        if exemplars:
            examples_block = "\n\n".join(
                f"Example {i + 1}:\n{e.record.report}" for i, e in enumerate(exemplars)
            )
        else:
            examples_block = "None."
        prompt = render(
            load_template("report_generation", self.template_dir),
            {"inputs": inputs_block, "examples": examples_block},
        )
        reply = self.planner_llm.chat([{"role": "user", "content": prompt}])
        if not reply.text:
            raise BackendUnavailableError("report backend returned empty text")
        state = step(state, Action("finalize", {"report": reply.text, "prompt": prompt}))

        self._log("report", session, trace_id, state, _digest(study_id, inputs_block), reply.text)
        return ReportResult(
            report=reply.text,
            findings=findings,
            exemplars=exemplars,
            trace_id=trace_id,
            state=state,
        )
