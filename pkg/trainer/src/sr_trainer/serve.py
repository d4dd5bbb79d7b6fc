"""The serve loop: one JSON request per stdin line, one JSON response per
stdout line.  Exceptions become error responses; the loop never crashes.
Diagnostics go to stderr so stdout stays a clean protocol channel.
"""

from __future__ import annotations

import json
import sys
import traceback

from .data import load_patches
from .training import run_request


def handle_line(line: str, dataset_path: str, base_seed: int, patches) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"id": "", "status": "error", "score": 0.0,
                "message": f"malformed request: {exc}"}
    req_id = request.get("id", "")
    try:
        result = run_request(request, dataset_path, base_seed, patches=patches)
        return {"id": req_id, "status": "ok", "score": result.score, "mse": result.mse}
    except Exception as exc:
        traceback.print_exc(file=sys.stderr)
        return {"id": req_id, "status": "error", "score": 0.0, "message": str(exc)}


def serve(dataset_path: str, base_seed: int = 0, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    patches = None
    try:
        patches = load_patches(dataset_path)
    except FileNotFoundError:
        pass  # fall back to per-request dataset paths
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        response = handle_line(line, dataset_path, base_seed, patches)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
