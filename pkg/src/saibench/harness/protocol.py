"""Line-delimited JSON protocol for predictors running as child processes.

Harness -> predictor::

    {"type": "hello", "workload": "md", "schema_version": 1,
     "seed": 3 | null, "config": {...}, "train": [records...]}
    {"type": "predict", "id": 17, "input": {...}}
    {"type": "shutdown"}

Predictor -> harness::

    {"type": "ack", "schema_version": 1}
    {"type": "result", "id": 17, "output": {...}}

Results may arrive in any order; they are matched to requests by id.
Inputs never carry labels: molecular frames send time_index, species and
positions; jets send event_id and particles; precipitation events send
event_id, the input frames and output_len. ``train`` holds full labeled
records in the dataset file formats.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from typing import Any, Iterable, Sequence

import numpy as np

from ..core import (
    SCHEMA_VERSION,
    JetEvent,
    MolecularFrame,
    PrecipEvent,
    PredictionSet,
    canonical_json,
    event_record,
    frame_record,
    prediction_from_wire,
    sample_id_of,
)

DEFAULT_TIMEOUT = 30.0


class PredictorError(RuntimeError):
    pass


class ProtocolError(PredictorError):
    pass


class PredictorTimeout(PredictorError):
    pass


def sample_to_input(sample: Any) -> dict:
    if isinstance(sample, MolecularFrame):
        return {"time_index": sample.time_index, "species": list(sample.species), "positions": sample.positions}
    if isinstance(sample, JetEvent):
        return {"event_id": sample.event_id, "particles": sample.particles}
    if isinstance(sample, PrecipEvent):
        return {"event_id": sample.event_id, "inputs": sample.inputs, "output_len": sample.output_len}
    raise TypeError(f"cannot encode {type(sample).__name__}")


def sample_to_train_record(sample: Any) -> dict:
    if isinstance(sample, MolecularFrame):
        return frame_record(sample)
    if isinstance(sample, JetEvent):
        return event_record(sample)
    if isinstance(sample, PrecipEvent):
        return {"event_id": sample.event_id, "frames": sample.frames, "p": sample.input_len, "f": sample.output_len}
    raise TypeError(f"cannot encode {type(sample).__name__}")


def _send(proc: subprocess.Popen, msg: dict) -> None:
    proc.stdin.write(canonical_json(msg) + "\n")
    proc.stdin.flush()


def _kill(proc: subprocess.Popen) -> None:
    if proc.poll() is None:
        proc.kill()
    proc.wait()


def run_external_predictor(
    command: Sequence[str],
    requests: Iterable[Any],
    workload: str,
    *,
    train: Sequence[Any] = (),
    seed: int | None = None,
    config: dict | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    model_id: str | None = None,
) -> PredictionSet:
    """Spawn ``command``, stream ``requests`` (samples) to it, and collect one result per sample id."""
    samples = list(requests)
    pending = {sample_id_of(s) for s in samples}
    if len(pending) != len(samples):
        raise ValueError("duplicate sample ids in requests")
    try:
        proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
    except OSError as exc:
        raise PredictorError(f"cannot start predictor {command[0]!r}: {exc}") from exc

    lines: queue.Queue = queue.Queue()
    stderr_chunks: list[str] = []

    def pump_stdout():
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)

    def pump_stderr():
        stderr_chunks.append(proc.stderr.read())

    threading.Thread(target=pump_stdout, daemon=True).start()
    threading.Thread(target=pump_stderr, daemon=True).start()

    def next_message(what: str) -> dict | None:
        try:
            line = lines.get(timeout=timeout)
        except queue.Empty:
            _kill(proc)
            raise PredictorTimeout(f"predictor timed out after {timeout}s waiting for {what}") from None
        if line is None:
            return None
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            _kill(proc)
            raise ProtocolError(f"malformed message while waiting for {what}: {line[:200]!r}") from None
        if not isinstance(msg, dict):
            _kill(proc)
            raise ProtocolError(f"message is not an object: {line[:200]!r}")
        return msg

    try:
        _send(proc, {
            "type": "hello",
            "workload": workload,
            "schema_version": SCHEMA_VERSION,
            "seed": seed,
            "config": config or {},
            "train": [sample_to_train_record(s) for s in train],
        })
        ack = next_message("handshake ack")
        if ack is None or ack.get("type") != "ack" or ack.get("schema_version") != SCHEMA_VERSION:
            _kill(proc)
            raise ProtocolError(f"handshake failed: got {ack!r}")

        def write_requests():
            try:
                for s in samples:
                    _send(proc, {"type": "predict", "id": sample_id_of(s), "input": sample_to_input(s)})
            except (BrokenPipeError, ValueError, OSError):
                pass

        writer = threading.Thread(target=write_requests, daemon=True)
        writer.start()

        entries: dict[int, Any] = {}
        while pending:
            msg = next_message(f"results for ids {sorted(pending)[:5]}")
            if msg is None:
                proc.wait()
                missing = sorted(pending)
                raise ProtocolError(
                    f"predictor exited (code {proc.returncode}) without a response for id "
                    f"{missing[0]}" + (f" and {len(missing) - 1} more" if len(missing) > 1 else "")
                )
            if msg.get("type") != "result" or "id" not in msg or "output" not in msg:
                _kill(proc)
                raise ProtocolError(f"unexpected message {str(msg)[:200]}")
            sid = msg["id"]
            if sid not in pending:
                _kill(proc)
                raise ProtocolError(f"response for unknown or repeated id {sid!r}")
            try:
                entries[sid] = prediction_from_wire(workload, msg["output"])
            except (KeyError, TypeError, ValueError) as exc:
                _kill(proc)
                raise ProtocolError(f"malformed output for id {sid}: {exc}") from None
            pending.discard(sid)
        writer.join()
        try:
            _send(proc, {"type": "shutdown"})
            proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass
        try:
            code = proc.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            _kill(proc)
            raise PredictorTimeout("predictor did not exit after shutdown") from None
        if code != 0:
            raise PredictorError(f"predictor exited with code {code}: {''.join(stderr_chunks)[-500:]}")
    finally:
        if proc.poll() is None:
            _kill(proc)

    ordered = {sid: entries[sid] for sid in sorted(entries)}
    return PredictionSet(model_id or f"external:{command[0]}", "external", -1 if seed is None else int(seed),
                         workload, ordered)


# ---------------------------------------------------------------------------
# server side helpers
# ---------------------------------------------------------------------------


def input_to_sample(workload: str, obj: dict) -> Any:
    if workload == "md":
        return MolecularFrame(obj["time_index"], obj["species"], obj["positions"])
    if workload == "jet":
        # label is withheld on the wire; 0 is a placeholder the predictors never read
        return JetEvent(obj["event_id"], np.asarray(obj["particles"], dtype=np.float64), 0)
    inputs = np.asarray(obj["inputs"], dtype=np.float64)
    f = int(obj["output_len"])
    frames = np.concatenate([inputs, np.zeros((f,) + inputs.shape[1:])])
    return PrecipEvent(obj["event_id"], frames, len(inputs), f)


def train_record_to_sample(workload: str, rec: dict) -> Any:
    from ..core import event_from_record, frame_from_record

    if workload == "md":
        return frame_from_record(rec)
    if workload == "jet":
        return event_from_record(rec)
    return PrecipEvent(rec["event_id"], rec["frames"], int(rec["p"]), int(rec["f"]))
