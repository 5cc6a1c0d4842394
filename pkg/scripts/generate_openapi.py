"""Write docs/openapi.json from the live FastAPI app."""

from __future__ import annotations

import tempfile
from pathlib import Path

from expertkb.config import Config
from expertkb.service import create_app, dump_openapi
from expertkb.store import KnowledgeStore


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        store = KnowledgeStore(data_dir=tmp)
        app = create_app(store, Config.from_dict({}))
        out = Path(__file__).resolve().parent.parent / "docs" / "openapi.json"
        dump_openapi(app, str(out))
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
