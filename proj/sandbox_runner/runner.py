#!/usr/bin/env python3
"""Interpreter-side shim for the process sandbox.

Usage: runner.py <job.json>

Reads the job, loads the input tables (multi mode) or a private copy of the
database (single mode), calls the entry function and writes result.json next
to the job. Exit status is 0 whenever result.json was written.
"""
import contextlib
import decimal
import io
import json
import math
import os
import resource
import shutil
import signal
import sys
import time
import traceback


class HarnessError(Exception):
    pass


class WallTimeout(BaseException):
    # BaseException so a bare `except Exception` in user code cannot swallow it.
    pass


def _inside(path, root):
    path = os.path.realpath(path)
    root = os.path.realpath(root)
    return os.path.commonpath([path, root]) == root


def load_job(job_path):
    try:
        with open(job_path) as f:
            job = json.load(f)
    except (OSError, ValueError) as e:
        raise HarnessError("cannot read job document: %s" % e)
    for key in ("mode", "code", "entry", "limits"):
        if key not in job:
            raise HarnessError("job document lacks '%s'" % key)
    if job["mode"] not in ("multi", "single"):
        raise HarnessError("unknown mode %r" % job["mode"])
    scratch = os.path.dirname(os.path.abspath(job_path))
    if job["mode"] == "multi":
        for p in job.get("inputs", []):
            if not _inside(p, scratch):
                raise HarnessError("input %s is outside the scratch directory" % p)
    elif "db_path" not in job:
        raise HarnessError("single-mode job lacks 'db_path'")
    return job, scratch


def load_table(path):
    import pandas as pd

    with open(path) as f:
        doc = json.load(f)
    names = [c["name"] for c in doc["columns"]]
    dtypes = [c.get("dtype", "object") for c in doc["columns"]]
    rows = [[bytes.fromhex(v["blob"]) if isinstance(v, dict) else v for v in r] for r in doc["rows"]]
    columns = {}
    for i, (name, dtype) in enumerate(zip(names, dtypes)):
        values = [r[i] for r in rows]
        numeric = all(v is None or (isinstance(v, (int, float)) and not isinstance(v, bool)) for v in values)
        if dtype == "int64" and numeric:
            columns[name] = pd.array(values, dtype="Int64") if None in values else pd.array(values, dtype="int64")
        elif dtype == "float64" and numeric:
            columns[name] = pd.array([math.nan if v is None else float(v) for v in values], dtype="float64")
        else:
            # Text stays text even when it looks numeric.
            columns[name] = pd.array(values, dtype="object")
    # Duplicate column names survive through the positional constructor.
    frame = pd.DataFrame({i: columns[n] for i, n in enumerate(names)}) if names else pd.DataFrame()
    frame.columns = names
    return frame


def _cell(v):
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        try:
            v = v.item()
        except (ValueError, AttributeError):
            pass
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return "null"
        return repr(v)
    if isinstance(v, decimal.Decimal):
        return str(v)
    if isinstance(v, bytes):
        return json.dumps(v.hex())
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    return json.dumps(str(v), ensure_ascii=False)


def serialize(value):
    """Renders the entry's return value as a JSON list of lists."""
    if hasattr(value, "itertuples"):
        value = list(value.itertuples(index=False, name=None))
    if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
        raise TypeError("entry returned %s, expected a list of tuples" % type(value).__name__)
    rows = []
    for item in value:
        if isinstance(item, (list, tuple)):
            rows.append("[" + ", ".join(_cell(v) for v in item) + "]")
        else:
            rows.append("[" + _cell(item) + "]")
    return "[" + ", ".join(rows) + "]"


def _on_alarm(signum, frame):
    raise WallTimeout()


def run(job, scratch):
    limits = job["limits"]
    os.chdir(scratch)
    mem = int(limits.get("memory_cap_bytes", 0))
    if mem > 0:
        resource.setrlimit(resource.RLIMIT_AS, (mem, mem))
    wall = max(1, int(math.ceil(int(limits.get("wall_timeout_ms", 300000)) / 1000.0)))

    if job["mode"] == "multi":
        args = [[load_table(p) for p in job.get("inputs", [])]]
    else:
        # A private copy keeps the original untouched whatever the code does.
        local = os.path.join(scratch, "input.db")
        shutil.copyfile(job["db_path"], local)
        args = [local]

    started = time.monotonic()
    stdout = io.StringIO()
    result = {}
    signal.signal(signal.SIGALRM, _on_alarm)
    signal.alarm(wall)
    try:
        namespace = {"__name__": "__sandbox__"}
        with contextlib.redirect_stdout(stdout):
            exec(compile(job["code"], "generated.py", "exec"), namespace)
            entry = namespace.get(job["entry"])
            if not callable(entry):
                raise NameError("the code does not define %s()" % job["entry"])
            value = entry(*args)
        signal.alarm(0)
        try:
            text = serialize(value)
        except TypeError:
            printed = stdout.getvalue().strip()
            if not printed:
                text = value if isinstance(value, str) else repr(value)
            else:
                text = printed
        result = {"outcome": "ok", "result_text": text}
    except WallTimeout:
        result = {"outcome": "timeout", "error": {"type": "timeout", "message": "wall-clock limit reached", "traceback": ""}}
    except MemoryError:
        signal.alarm(0)
        result = {"outcome": "oom", "error": {"type": "MemoryError", "message": "memory limit reached", "traceback": ""}}
    except BaseException as e:  # noqa: BLE001 - user code may raise anything
        signal.alarm(0)
        result = {
            "outcome": "exec_error",
            "error": {"type": type(e).__name__, "message": str(e), "traceback": traceback.format_exc()},
        }
    result["duration_ms"] = int((time.monotonic() - started) * 1000)
    if stdout.getvalue():
        result["stdout"] = stdout.getvalue()[-4000:]
    return result


def main(argv):
    if len(argv) != 2:
        sys.stderr.write("usage: runner.py <job.json>\n")
        return 2
    try:
        job, scratch = load_job(argv[1])
        result = run(job, scratch)
    except HarnessError as e:
        sys.stderr.write("harness: %s\n" % e)
        return 3
    out = os.path.join(scratch, "result.json")
    try:
        with open(out + ".tmp", "w") as f:
            json.dump(result, f)
        os.replace(out + ".tmp", out)
    except OSError as e:
        sys.stderr.write("cannot write result: %s\n" % e)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
