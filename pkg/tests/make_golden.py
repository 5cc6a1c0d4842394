"""Regenerate the golden scripted-query responses.

Run after a deliberate fixture or pipeline change, then inspect the diff:

    python -m tests.make_golden
"""

from __future__ import annotations

import json
import tempfile

from .pipeline import GOLDEN_DIR, build_indexed_store, run_scripted_queries


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        store = build_indexed_store(tmp + "/data")
        results = run_scripted_queries(store)
    for name, response in results.items():
        path = GOLDEN_DIR / f"{name}.json"
        path.write_text(
            json.dumps(response, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
