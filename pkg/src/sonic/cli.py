"""Command-line entry points.

sonic-encode    content -> WAV (or raw PCM on stdout)
sonic-decode    WAV/PCM -> stored items (PNG / text dumps)
sonic-simulate  degrade a WAV through the RSSI channel model
sonic-queuesim  queue-scaling runs and the scalability sweep
sonic-server    head-end loop: HTTP uplink + scheduler + audio out
sonic-client    receiver daemon: PCM in, local API + UI out
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np


def _add_config_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file (defaults built in)")


def _load(args) -> "AppConfig":
    from sonic.config import load_config

    return load_config(getattr(args, "config", None))


def encode_main(argv=None) -> int:
    from sonic import modem, pipeline
    from sonic import renderer as rd
    from sonic.loopback import default_fixture_pages

    p = argparse.ArgumentParser(prog="sonic-encode", description="Encode content to audio.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--url", help="fixture page URL to render and encode")
    src.add_argument("--gpt", help="prompt answered by the configured LLM (stub by default)")
    src.add_argument("--image", help="encode an existing image file as a page capture")
    p.add_argument("--source", default="", help="source URL recorded for --image")
    p.add_argument("--request-id", type=int, default=1)
    p.add_argument("--out", help="output WAV path")
    p.add_argument("--pcm-stdout", action="store_true", help="raw 16-bit PCM to stdout")
    _add_config_arg(p)
    args = p.parse_args(argv)
    cfg = _load(args)

    if args.gpt:
        llm = rd.StubLlm()
        if cfg.endpoints.llm_mode == "http" and cfg.endpoints.llm_url:
            llm = rd.HttpLlm(cfg.endpoints.llm_url, cfg.endpoints.llm_key)
        payload = rd.render_llm(args.gpt, llm)
        sonic_file = pipeline.build_llm_file(args.request_id, args.gpt, payload, int(time.time()))
    else:
        if args.url:
            browser = rd.FixtureBrowser(default_fixture_pages())
            capture = rd.capture_page(args.url, browser)
        else:
            from PIL import Image

            img = np.asarray(Image.open(args.image).convert("RGB"))
            if img.shape[1] != 320:
                new_h = max(1, round(img.shape[0] * 320 / img.shape[1]))
                img = np.asarray(Image.fromarray(img).resize((320, new_h)))
            capture = rd.PageCapture(image=img[:10000], links=[], source_url=args.source or args.image)
        strips = rd.compress_strips(capture.image, cfg.server.strip_quality, cfg.server.strip_height)
        sonic_file = pipeline.build_webpage_file(args.request_id, capture, strips, int(time.time()))

    pcm = pipeline.transmission_to_audio(sonic_file, cfg.fec, cfg.profile)
    if args.pcm_stdout:
        sys.stdout.buffer.write(pcm.samples.astype("<i2").tobytes())
    elif args.out:
        modem.write_wav(pcm, args.out)
        print(f"wrote {args.out}: {pcm.duration:.2f} s of audio, "
              f"{sonic_file.metadata.frame_count} payload frames")
    else:
        p.error("need --out or --pcm-stdout")
    return 0


def decode_main(argv=None) -> int:
    from sonic import modem
    from sonic.client import ClientStore, IngestPipeline, classify_completion

    p = argparse.ArgumentParser(prog="sonic-decode", description="Decode received audio.")
    p.add_argument("wavs", nargs="*", help="WAV files in arrival order")
    p.add_argument("--pcm-stdin", action="store_true", help="read raw 16-bit PCM from stdin")
    p.add_argument("--store", default="sonic-client.db")
    p.add_argument("--dump-dir", help="write decoded PNG/TXT files here")
    _add_config_arg(p)
    args = p.parse_args(argv)
    cfg = _load(args)

    store = ClientStore(args.store)
    pipe = IngestPipeline(store, profile=cfg.profile, fec_cfg=cfg.fec)
    items = []
    if args.pcm_stdin:
        data = sys.stdin.buffer.read()
        samples = np.frombuffer(data, dtype="<i2")
        items += pipe.push_pcm(samples)
    for path in args.wavs:
        items += pipe.push_pcm(modem.read_wav(path))
    for item in items:
        verdict = classify_completion(item).value
        print(f"item {item.request_id}: {item.kind} {item.metadata.source!r} "
              f"loss={item.loss_percent:.1f}% -> {verdict}")
        if args.dump_dir:
            out = Path(args.dump_dir)
            out.mkdir(parents=True, exist_ok=True)
            if item.raster is not None:
                from PIL import Image

                Image.fromarray(item.raster).save(out / f"item_{item.request_id}.png")
            if item.text is not None:
                (out / f"item_{item.request_id}.txt").write_text(item.text)
    if not items:
        print("no transmissions detected (NO_SYNC)")
    return 0


def simulate_main(argv=None) -> int:
    from sonic import channel, modem

    p = argparse.ArgumentParser(
        prog="sonic-simulate", description="Degrade audio through the RSSI channel model."
    )
    p.add_argument("--rssi", type=float, required=True, help="RSSI in dBm (e.g. -85)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-dropouts", action="store_true", help="AWGN only")
    _add_config_arg(p)
    args = p.parse_args(argv)
    cfg = _load(args)

    pcm = modem.read_wav(args.infile)
    cond = channel.ChannelConditions(
        rssi_dbm=args.rssi, seed=args.seed, burst_mean_frames=cfg.burst_mean_frames
    )
    out = channel.apply_audio_channel(pcm, cond, cfg.loss_model, dropouts=not args.no_dropouts)
    modem.write_wav(out, args.out)
    p_loss = channel.frame_loss_prob(args.rssi, cfg.loss_model)
    print(f"wrote {args.out}: snr={channel.snr_for_rssi(args.rssi):.0f} dB, "
          f"frame-level loss prob {p_loss:.3f}")
    return 0


def queuesim_main(argv=None) -> int:
    from sonic import queue_sim as qs

    p = argparse.ArgumentParser(prog="sonic-queuesim", description="Broadcast queue simulation.")
    p.add_argument("--users", type=int, default=30)
    p.add_argument("--freqs", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--push", type=str, default="", help="push events as hour:count,... (e.g. 9.5:25)")
    p.add_argument("--out", help="result JSON path")
    p.add_argument("--csv", help="queue time-series CSV path")
    p.add_argument("--sweep", action="store_true", help="run the full scalability grid")
    _add_config_arg(p)
    args = p.parse_args(argv)
    cfg = _load(args)

    if args.sweep:
        results = qs.sweep(seed=args.seed, svc=cfg.service_model)
        summary = {k: {f: getattr(r, f) for f in ("peak_queue", "served", "unserved", "skipped", "drained")}
                   for k, r in results.items()}
        for k, row in summary.items():
            print(f"{k:>18}: peak={row['peak_queue']:>4} served={row['served']:>4} "
                  f"unserved={row['unserved']:>4} drained={row['drained']}")
        if args.out:
            Path(args.out).write_text(json.dumps(
                {k: r.to_json() for k, r in results.items()}, indent=1))
        return 0

    push = tuple(
        (float(h), int(c)) for h, c in
        (pair.split(":") for pair in args.push.split(",") if pair)
    )
    result = qs.run_scenario(args.users, args.freqs, seed=args.seed,
                             push_events=push, svc=cfg.service_model)
    print(f"peak={result.peak_queue} served={result.served} unserved={result.unserved} "
          f"skipped={result.skipped} drained={result.drained}")
    if args.out:
        Path(args.out).write_text(json.dumps(result.to_json(), indent=1))
    if args.csv:
        result.write_csv(args.csv)
    return 0


def server_main(argv=None) -> int:
    from sonic import renderer as rd
    from sonic.loopback import default_fixture_pages
    from sonic.server import FileTailer, SonicServer, create_app

    p = argparse.ArgumentParser(prog="sonic-server", description="Broadcast head-end.")
    p.add_argument("--http", default="127.0.0.1:8073", help="uplink/status bind address")
    p.add_argument("--uplink-file", help="tail this file for '<sender> <type> <body>' lines")
    p.add_argument("--out-dir", help="write per-item WAV files here")
    p.add_argument("--pcm-stdout", action="store_true",
                   help="stream played transmissions as raw 16-bit PCM on stdout")
    p.add_argument("--events", help="JSONL event log path")
    p.add_argument("--db", help="sqlite request-log path")
    p.add_argument("--browser", default="fixture", help="'fixture' (built-in demo pages)")
    p.add_argument("--tick", type=float, default=0.25, help="scheduler tick seconds")
    _add_config_arg(p)
    args = p.parse_args(argv)
    cfg = _load(args)

    scfg = cfg.server
    scfg.write_wav_dir = args.out_dir
    scfg.event_log_path = args.events
    scfg.db_path = args.db
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    browser = rd.FixtureBrowser(default_fixture_pages()) if args.browser == "fixture" else None
    llm = rd.StubLlm()
    if cfg.endpoints.llm_mode == "http" and cfg.endpoints.llm_url:
        llm = rd.HttpLlm(cfg.endpoints.llm_url, cfg.endpoints.llm_key)

    on_air = None
    if args.pcm_stdout:
        from sonic import modem as modem_mod
        from sonic import pipeline

        def on_air(kind, item):
            if kind == "keepalive":
                pcm = modem_mod.modulate(pipeline.keepalive_slot(cfg.fec), cfg.profile)
            else:
                pcm = modem_mod.modulate(b"".join(item.slots), cfg.profile)
            sys.stdout.buffer.write(pcm.samples.astype("<i2").tobytes())
            sys.stdout.buffer.flush()

    server = SonicServer(config=scfg, browser=browser, llm=llm, on_air=on_air)
    tailer = FileTailer(args.uplink_file) if args.uplink_file else None

    import threading

    import uvicorn

    host, port = args.http.rsplit(":", 1)
    app = create_app(server)
    http_thread = threading.Thread(
        target=uvicorn.run,
        args=(app,),
        kwargs={"host": host, "port": int(port), "log_level": "warning"},
        daemon=True,
    )
    http_thread.start()
    # stdout may carry raw PCM; operator chatter goes to stderr
    print(f"sonic-server: uplink on http://{args.http}/uplink, window "
          f"{scfg.window.start_minute // 60:02d}:{scfg.window.start_minute % 60:02d}-"
          f"{scfg.window.end_minute // 60:02d}:{scfg.window.end_minute % 60:02d}",
          file=sys.stderr)
    try:
        while True:
            now = time.time()
            if tailer:
                for msg in tailer.poll():
                    server.submit_uplink(msg.sender_id, msg.body, now)
            server.tick(now)
            time.sleep(args.tick)
    except KeyboardInterrupt:
        return 0


def client_main(argv=None) -> int:
    from sonic import modem
    from sonic.client import ClientStore, IngestPipeline, create_app

    p = argparse.ArgumentParser(prog="sonic-client", description="Receiver daemon.")
    p.add_argument("wavs", nargs="*", help="WAV files to ingest at startup")
    p.add_argument("--pcm-stdin", action="store_true", help="stream raw 16-bit PCM from stdin")
    p.add_argument("--store", default="sonic-client.db")
    p.add_argument("--serve", help="bind local API at host:port (serves the web UI too)")
    p.add_argument("--uplink-url", help="forward /request bodies to this server uplink URL")
    p.add_argument("--static-dir", help="web UI asset directory", default=None)
    _add_config_arg(p)
    args = p.parse_args(argv)
    cfg = _load(args)

    store = ClientStore(args.store)
    pipe = IngestPipeline(store, profile=cfg.profile, fec_cfg=cfg.fec)
    for path in args.wavs:
        for item in pipe.push_pcm(modem.read_wav(path)):
            print(f"received item {item.request_id} ({item.kind}) loss={item.loss_percent:.1f}%", flush=True)

    uplink = None
    uplink_url = args.uplink_url or cfg.endpoints.uplink_url
    if uplink_url:
        import urllib.request

        def uplink(body: str) -> dict:
            req = urllib.request.Request(
                uplink_url,
                data=json.dumps({"sender": "client", "body": body}).encode(),
                headers={"Content-Type": "application/json"},
            )
            with urllib.request.urlopen(req, timeout=10) as resp:
                return json.loads(resp.read())

    if args.pcm_stdin and not args.serve:
        _stream_stdin(pipe)
        return 0

    if args.serve:
        import threading

        import uvicorn

        static = args.static_dir
        if static is None:
            bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
            static = str(bundled) if bundled.is_dir() else None
        app = create_app(store, pipe=pipe, uplink=uplink, static_dir=static)
        if args.pcm_stdin:
            threading.Thread(target=_stream_stdin, args=(pipe,), daemon=True).start()
        host, port = args.serve.rsplit(":", 1)
        uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return 0


def _stream_stdin(pipe) -> None:
    chunk_bytes = 8192
    while True:
        data = sys.stdin.buffer.read(chunk_bytes)
        if not data:
            break
        samples = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        for item in pipe.push_pcm(samples):
            print(f"received item {item.request_id} ({item.kind}) loss={item.loss_percent:.1f}%", flush=True)
