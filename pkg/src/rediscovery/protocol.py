"""Wire protocol for external search engines.

Newline-delimited JSON objects over the child process's standard streams.
Four message types:

``hello``       harness -> engine   problem id, function set, complexity cap,
                                    time budget, train/test CSV paths
``candidates``  engine  -> harness  elapsed seconds + hall-of-fame snapshot,
                                    each entry an expression string with its
                                    train loss
``decision``    harness -> engine   ``stop`` true/false for the last snapshot
``bye``         either direction    terminal, with a reason

Expressions travel in the canonical surface grammar (``data/GRAMMAR.ebnf``).
Datasets are CSV files with header ``v1,...,vK,target``.
"""

from __future__ import annotations

import csv
import json
import queue
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Optional, Sequence, Union

from .registry import Dataset

__all__ = [
    "Hello",
    "CandidateEntry",
    "Candidates",
    "DecisionMessage",
    "Bye",
    "Message",
    "ProtocolError",
    "encode",
    "decode",
    "LineTransport",
    "ProcessTransport",
    "write_dataset_csv",
    "read_dataset_csv",
]


class ProtocolError(Exception):
    """A message that does not follow the schema."""


@dataclass(frozen=True)
class Hello:
    problem_id: str
    function_set: tuple[str, ...]
    max_complexity: int
    budget_s: float
    train_path: str
    test_path: str


@dataclass(frozen=True)
class CandidateEntry:
    expr: str
    train_loss: float


@dataclass(frozen=True)
class Candidates:
    run_elapsed_s: float
    exprs: tuple[CandidateEntry, ...]


@dataclass(frozen=True)
class DecisionMessage:
    stop: bool


@dataclass(frozen=True)
class Bye:
    reason: str


Message = Union[Hello, Candidates, DecisionMessage, Bye]


def encode(message: Message) -> str:
    if isinstance(message, Hello):
        payload = {
            "type": "hello",
            "problem_id": message.problem_id,
            "function_set": list(message.function_set),
            "max_complexity": message.max_complexity,
            "budget_s": message.budget_s,
            "train_path": message.train_path,
            "test_path": message.test_path,
        }
    elif isinstance(message, Candidates):
        payload = {
            "type": "candidates",
            "run_elapsed_s": message.run_elapsed_s,
            "exprs": [{"expr": e.expr, "train_loss": e.train_loss} for e in message.exprs],
        }
    elif isinstance(message, DecisionMessage):
        payload = {"type": "decision", "stop": message.stop}
    elif isinstance(message, Bye):
        payload = {"type": "bye", "reason": message.reason}
    else:
        raise ProtocolError(f"cannot encode {type(message).__name__}")
    return json.dumps(payload, separators=(",", ":"))


def decode(line: str) -> Message:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not JSON: {exc}") from exc
    if not isinstance(payload, dict) or "type" not in payload:
        raise ProtocolError("message must be an object with a 'type'")
    kind = payload["type"]
    try:
        if kind == "hello":
            return Hello(
                problem_id=str(payload["problem_id"]),
                function_set=tuple(str(f) for f in payload["function_set"]),
                max_complexity=int(payload["max_complexity"]),
                budget_s=float(payload["budget_s"]),
                train_path=str(payload["train_path"]),
                test_path=str(payload["test_path"]),
            )
        if kind == "candidates":
            exprs = payload["exprs"]
            if not isinstance(exprs, list):
                raise ProtocolError("'exprs' must be a list")
            entries = tuple(
                CandidateEntry(str(e["expr"]), float(e["train_loss"])) for e in exprs
            )
            return Candidates(float(payload["run_elapsed_s"]), entries)
        if kind == "decision":
            return DecisionMessage(bool(payload["stop"]))
        if kind == "bye":
            return Bye(str(payload.get("reason", "")))
    except ProtocolError:
        raise
    except Exception as exc:
        raise ProtocolError(f"bad {kind} message: {exc}") from exc
    raise ProtocolError(f"unknown message type {kind!r}")


class LineTransport:
    """Duplex line transport over file-like objects, EOF-aware.

    Reads happen on a daemon thread so the caller can enforce timeouts
    against slow or wedged peers.
    """

    _EOF = object()

    def __init__(self, writer: IO[str], reader: IO[str]):
        self._writer = writer
        self._queue: "queue.Queue[object]" = queue.Queue()
        self._reader_thread = threading.Thread(
            target=self._pump, args=(reader,), daemon=True
        )
        self._reader_thread.start()

    def _pump(self, reader: IO[str]) -> None:
        try:
            for line in reader:
                line = line.strip()
                if line:
                    self._queue.put(line)
        except Exception:
            pass
        self._queue.put(self._EOF)

    def send(self, message: Message) -> None:
        self._writer.write(encode(message) + "\n")
        self._writer.flush()

    def recv(self, timeout: Optional[float] = None) -> Optional[Message]:
        """Next message, ``None`` on EOF; raises TimeoutError when silent."""
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message within timeout") from None
        if item is self._EOF:
            return None
        return decode(item)  # type: ignore[arg-type]


class ProcessTransport(LineTransport):
    """Transport over a child process's stdin/stdout."""

    def __init__(self, command: Sequence[str], cwd: Optional[Union[str, Path]] = None):
        # Engines must not inherit our stderr pipe: a wedged engine holding
        # it open would block whoever drains this process's diagnostics.
        self.process = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
            cwd=cwd,
        )
        assert self.process.stdin is not None and self.process.stdout is not None
        super().__init__(self.process.stdin, self.process.stdout)

    def send(self, message: Message) -> None:
        try:
            super().send(message)
        except (BrokenPipeError, ValueError):
            pass  # peer already gone; the read side reports EOF

    def close(self, timeout: float = 5.0) -> None:
        if self.process.poll() is None:
            try:
                self.process.stdin.close()  # type: ignore[union-attr]
            except Exception:
                pass
            try:
                self.process.wait(timeout=timeout)
            except subprocess.TimeoutExpired:
                self.process.kill()
                self.process.wait()


def write_dataset_csv(dataset: Dataset, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"v{i}" for i in dataset.variable_indices] + ["target"])
        for row, target in zip(dataset.inputs, dataset.targets):
            writer.writerow([repr(float(x)) for x in row] + [repr(float(target))])


def read_dataset_csv(path: Union[str, Path]) -> tuple[dict[int, list[float]], list[float]]:
    """Columns keyed by variable index, plus targets (adapter-side helper)."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    header, data = rows[0], rows[1:]
    if not header or header[-1] != "target":
        raise ProtocolError(f"{path}: expected trailing 'target' column")
    indices = [int(name[1:]) for name in header[:-1]]
    columns: dict[int, list[float]] = {i: [] for i in indices}
    targets: list[float] = []
    for row in data:
        for i, value in zip(indices, row[:-1]):
            columns[i].append(float(value))
        targets.append(float(row[-1]))
    return columns, targets
