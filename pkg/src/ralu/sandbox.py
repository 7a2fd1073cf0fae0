"""Run object-language programs in a subprocess with a timeout and output caps."""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from ralu.errors import RaluError

SCRIPT_NAME = "main.py"


class SandboxSpawnError(RaluError):
    pass


@dataclass
class SandboxPolicy:
    interpreter_path: str = sys.executable
    timeout_s: float = 10.0
    max_output_bytes: int = 64 * 1024
    # parent directory for the per-run scratch directories; None = system temp
    working_dir: str | None = None

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_output_bytes <= 0:
            raise ValueError("max_output_bytes must be positive")


@dataclass
class ExecResult:
    exit_code: int | None
    stdout: str
    stderr: str
    timed_out: bool
    duration_s: float
    workdir: str

    @property
    def ok(self) -> bool:
        return not self.timed_out and self.exit_code == 0


def _read_capped(path: Path, limit: int) -> str:
    with open(path, "rb") as fh:
        data = fh.read(limit)
    return data.decode("utf-8", errors="replace")


def run_script(source: str, policy: SandboxPolicy | None = None, keep: bool = False) -> ExecResult:
    """Execute ``source`` as ``<interpreter_path> main.py`` in a fresh directory.

    The scratch directory is removed afterwards unless ``keep`` is set.
    """
    policy = policy or SandboxPolicy()
    if policy.working_dir:
        os.makedirs(policy.working_dir, exist_ok=True)
    workdir = Path(tempfile.mkdtemp(prefix="ralu-run-", dir=policy.working_dir))
    try:
        script = workdir / SCRIPT_NAME
        script.write_text(source, encoding="utf-8")
        out_path, err_path = workdir / ".stdout", workdir / ".stderr"
        env = {
            "PATH": os.environ.get("PATH", ""),
            "PYTHONDONTWRITEBYTECODE": "1",
            "PYTHONIOENCODING": "utf-8",
            "HOME": str(workdir),
        }
        started = time.perf_counter()
        with open(out_path, "wb") as out, open(err_path, "wb") as err:
            try:
                proc = subprocess.Popen(
                    [policy.interpreter_path, SCRIPT_NAME],
                    cwd=workdir,
                    stdin=subprocess.DEVNULL,
                    stdout=out,
                    stderr=err,
                    env=env,
                    start_new_session=True,
                )
            except OSError as exc:
                raise SandboxSpawnError(f"cannot start {policy.interpreter_path}: {exc}") from exc
            timed_out = False
            try:
                proc.wait(timeout=policy.timeout_s)
            except subprocess.TimeoutExpired:
                timed_out = True
                try:
                    os.killpg(proc.pid, signal.SIGKILL)
                except ProcessLookupError:
                    pass
                proc.wait()
        duration = time.perf_counter() - started
        return ExecResult(
            exit_code=None if timed_out else proc.returncode,
            stdout=_read_capped(out_path, policy.max_output_bytes),
            stderr=_read_capped(err_path, policy.max_output_bytes),
            timed_out=timed_out,
            duration_s=duration,
            workdir=str(workdir),
        )
    finally:
        if not keep:
            shutil.rmtree(workdir, ignore_errors=True)
