#!/usr/bin/env python3
"""Launch the orchestrator service (mock backends by default).

Usage: python3 scripts/run_service.py [--config service.conf]

With the frontend built (`cd frontend && npm install && npm run build`) and
`frontend_dir = frontend` in the config, the web UI is served at /.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from diffusionx.service import main

if __name__ == "__main__":
    raise SystemExit(main())
