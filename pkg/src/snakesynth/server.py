"""Live session endpoint: pointer messages in, PCM16 audio blocks out.

One connection owns one LiveRenderer, so concurrent sessions never share
trigger state. Per-session message handling is serialized in arrival
order by a reader task feeding a queue; the session loop drains the
queue, emits due blocks, and paces itself to real time (a `pace` of 0
streams as fast as the client reads, which is what the tests use).

Wire protocol, structured text frames (JSON), version 1:

    server -> client   hello {version, sample_rate, block}
                       grid  {n, mosaic}        mosaic: URL or null
                       audio {seq, pcm}         pcm: base64 int16 LE mono
                       error {message}
    client -> server   hello {version}          optional, checked if sent
                       pointer {t, x, y, kind}  kind: down | move | up
"""

from __future__ import annotations

import asyncio
import base64
import json
import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import FileResponse, HTMLResponse, PlainTextResponse, Response
from starlette.websockets import WebSocket, WebSocketDisconnect

from .config import SynthConfig
from .engine import LiveRenderer, PointerEvent, quantize_pcm16
from .grid import GridSpec

PROTOCOL_VERSION = 1

_FALLBACK_PAGE = """<!doctype html>
<meta charset="utf-8">
<title>snakesynth</title>
<body style="font-family: system-ui; max-width: 40em; margin: 4em auto;">
<h1>snakesynth session server</h1>
<p>The server is running. The browser pad bundle is not built or not on
this server's UI path; connect a client to the <code>/session</code>
socket, or build the frontend and restart with its dist directory.</p>
<p><img src="/mosaic.png" alt="latent grid mosaic" style="max-width:100%">
</body>
"""


def _find_ui_dir(explicit) -> Optional[Path]:
    candidates = []
    if explicit:
        candidates.append(Path(explicit))
    env = os.environ.get("SNAKESYNTH_UI")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).parent / "ui")
    candidates.append(Path.cwd() / "frontend" / "dist")
    for c in candidates:
        if c.is_dir() and (c / "index.html").exists():
            return c
    return None


def create_app(clips: dict, cfg: SynthConfig = SynthConfig(),
               spec: Optional[GridSpec] = None, mosaic_png: Optional[bytes] = None,
               pace: float = 1.0, gain: float = 1.0, tail_s: float = 1.0,
               ui_dir=None) -> FastAPI:
    """App factory; `clips` is the (i,j) -> AudioClip grid cache."""
    spec = spec if spec is not None else GridSpec(cfg.grid_n)
    ui_path = _find_ui_dir(ui_dir)
    app = FastAPI(title="snakesynth", docs_url=None, redoc_url=None)
    block_s = cfg.block / cfg.sample_rate

    @app.get("/")
    def index():
        if ui_path is not None:
            return FileResponse(ui_path / "index.html")
        return HTMLResponse(_FALLBACK_PAGE)

    @app.get("/mosaic.png")
    def mosaic():
        if mosaic_png is None:
            return PlainTextResponse("no mosaic rendered", status_code=404)
        return Response(mosaic_png, media_type="image/png")

    @app.get("/ui/{asset:path}")
    def ui_asset(asset: str):
        if ui_path is None:
            return PlainTextResponse("UI bundle not built", status_code=404)
        target = (ui_path / asset).resolve()
        if not str(target).startswith(str(ui_path.resolve())) or not target.is_file():
            return PlainTextResponse("not found", status_code=404)
        return FileResponse(target)

    @app.websocket("/session")
    async def session(ws: WebSocket):
        await ws.accept()
        await ws.send_text(json.dumps({"type": "hello", "version": PROTOCOL_VERSION,
                                       "sample_rate": cfg.sample_rate, "block": cfg.block}))
        await ws.send_text(json.dumps({"type": "grid", "n": spec.n,
                                       "mosaic": "/mosaic.png" if mosaic_png else None}))
        renderer = LiveRenderer(clips, cfg, spec, gain=gain, tail_s=tail_s)
        queue: asyncio.Queue = asyncio.Queue()
        seq = 0

        async def reader():
            try:
                while True:
                    queue.put_nowait(await ws.receive_text())
            except WebSocketDisconnect:
                queue.put_nowait(None)

        async def handle(raw) -> bool:
            """Apply one client frame; False ends the session."""
            if raw is None:
                return False
            try:
                msg = json.loads(raw)
                if not isinstance(msg, dict):
                    raise ValueError("frame must be an object")
                kind = msg.get("type")
                if kind == "hello":
                    if msg.get("version") != PROTOCOL_VERSION:
                        await ws.send_text(json.dumps({
                            "type": "error",
                            "message": f"protocol version {msg.get('version')} unsupported; "
                                       f"server speaks {PROTOCOL_VERSION}"}))
                        await ws.close(code=1002)
                        return False
                    return True
                if kind == "pointer":
                    ev = PointerEvent(float(msg["t"]), float(msg["x"]),
                                      float(msg["y"]), str(msg["kind"]))
                    renderer.push(ev)
                    return True
                raise ValueError(f"unknown message type {kind!r}")
            except (KeyError, TypeError, ValueError) as exc:
                await ws.send_text(json.dumps({"type": "error", "message": str(exc)}))
                return True

        reader_task = asyncio.create_task(reader())
        try:
            while True:
                # drain every frame the transport has already delivered
                # before producing a block: the reader moves one frame per
                # scheduler turn, so keep yielding until a turn moves nothing
                while True:
                    if not queue.empty():
                        if not await handle(queue.get_nowait()):
                            return
                        continue
                    await asyncio.sleep(0)
                    if queue.empty():
                        break
                block = renderer.pull_block()
                if block is None:
                    if not await handle(await queue.get()):
                        return
                    continue
                pcm = base64.b64encode(quantize_pcm16(block).tobytes()).decode("ascii")
                await ws.send_text(json.dumps({"type": "audio", "seq": seq, "pcm": pcm}))
                seq += 1
                if pace > 0:
                    await asyncio.sleep(block_s / pace)
        except WebSocketDisconnect:
            pass
        finally:
            reader_task.cancel()

    return app


def serve(clips: dict, cfg: SynthConfig = SynthConfig(), spec: Optional[GridSpec] = None,
          mosaic_png: Optional[bytes] = None, host: str = "127.0.0.1",
          port: int = 8765, ui_dir=None) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn
    app = create_app(clips, cfg, spec, mosaic_png, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
