"""Run-directory layout and the append-only run log.

Each pipeline stage writes its outputs into the run directory and the
next stage reads them back; records carry no wall-clock data, so a rerun
over identical inputs produces a byte-identical directory.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

CONTEXTS_FILE = "contexts.jsonl"
COMPLETIONS_FILE = "completions.jsonl"
SUGGESTIONS_FILE = "suggestions.jsonl"
PARSE_REPORT_FILE = "parse_report.jsonl"
VERDICTS_FILE = "verdicts.jsonl"
DIVERSITY_FILE = "diversity.jsonl"
REPORT_JSON_FILE = "report.json"
REPORT_TEXT_FILE = "report.txt"
RUN_LOG_FILE = "run.log"


def file_digest(path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def hash_directory(directory) -> str:
    """Order-independent digest over every file in a directory tree.

    Hashes (relative path, content digest) pairs in sorted order, so two
    runs match iff they wrote the same bytes to the same names.
    """
    root = Path(directory)
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode("utf-8"))
        digest.update(file_digest(path).encode("ascii"))
    return digest.hexdigest()


def append_run_log(
    directory,
    command: str,
    inputs: dict[str, str],
    outputs: list[str],
    args: dict | None = None,
) -> None:
    """Append one run record with input digests; no timestamps by design."""
    record = {
        "command": command,
        "inputs": {name: file_digest(path) for name, path in sorted(inputs.items())},
        "outputs": sorted(outputs),
    }
    if args:
        record["args"] = args
    path = Path(directory) / RUN_LOG_FILE
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(record, sort_keys=True) + "\n")


def write_jsonl(path, records) -> int:
    """Write records one JSON object per line; returns the count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
            count += 1
    return count


def read_jsonl(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
