"""Turns requests into transmittable payloads.

URL requests: a headless-browser endpoint (abstracted; tests and demos
use the deterministic fixture browser) renders the page at iPhone-SE
viewport (375x667), takes a full-page screenshot, and this module
resizes it to 320 px wide, extracts hyperlink bounding boxes scaled by
320/375, compresses the raster into independently decodable horizontal
strips, and scores internal links for idle-time pushing.

LLM requests: a completion endpoint (or the deterministic stub) yields
a UTF-8 payload truncated to a byte cap.

Strips are the loss-tolerance mechanism: each strip is a self-contained
image, so a lost frame wipes a known pixel band instead of breaking one
monolithic compressed stream.  On the wire every strip record is
self-delimiting ("STRP" magic + index + codec + length) so the decoder
can resync past damaged records.
"""

from __future__ import annotations

import io
import math
import struct
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from PIL import Image

from sonic.format import IMAGE_WIDTH, MAX_IMAGE_HEIGHT, ClickMapEntry

CAPTURE_VIEWPORT = (375, 667)
STRIP_MAGIC = b"STRP"
STRIP_CODECS = {"webp": 0, "jpeg": 1, "png": 2}
STRIP_CODEC_NAMES = {v: k for k, v in STRIP_CODECS.items()}
LLM_BYTE_CAP = 4000
PUSH_WEIGHT_AREA = 0.68
PUSH_WEIGHT_Y = 0.32


class NavigationTimeout(Exception):
    pass


class CaptureFailed(Exception):
    pass


class LlmUnavailable(Exception):
    pass


@dataclass
class RenderedPage:
    """Raw browser output at capture viewport width."""

    image: np.ndarray  # (h, 375, 3) uint8
    links: list[tuple[str, tuple[float, float, float, float]]]  # url, (x, y, w, h)


class Browser(Protocol):
    def navigate(self, url: str, timeout_s: float) -> RenderedPage: ...


@dataclass
class PageCapture:
    image: np.ndarray  # (h, 320, 3) uint8, h <= 10000
    links: list[ClickMapEntry]
    source_url: str
    capture_viewport: tuple[int, int] = CAPTURE_VIEWPORT
    truncated: bool = False


@dataclass
class StripSet:
    strip_height: int
    width: int
    height: int
    codec: str
    strips: list[bytes] = field(default_factory=list)

    @property
    def n_strips(self) -> int:
        return len(self.strips)

    def compressed_size(self) -> int:
        return sum(len(s) for s in self.strips)


@dataclass(frozen=True)
class LinkScore:
    entry: ClickMapEntry
    score: float


class FixturePage:
    """Declarative synthetic page for tests and demos: deterministic
    text-like texture plus hand-placed anchor boxes."""

    def __init__(self, height: int = 667, anchors=None, seed: int = 0):
        self.height = height
        self.anchors = anchors or []
        self.seed = seed

    def render(self) -> RenderedPage:
        w = CAPTURE_VIEWPORT[0]
        rng = np.random.default_rng(self.seed)
        img = np.full((self.height, w, 3), 250, dtype=np.uint8)
        # text-ish rows: dark dashes of random run length on a 18 px grid
        for row in range(8, self.height - 10, 18):
            x = 12
            while x < w - 24:
                run = int(rng.integers(8, 40))
                img[row : row + 9, x : min(x + run, w - 12)] = rng.integers(20, 90)
                x += run + int(rng.integers(4, 14))
        for url, (x, y, bw, bh) in self.anchors:
            x0, y0 = int(x), int(y)
            img[y0 : y0 + int(bh), x0 : x0 + int(bw), 0] = 30
            img[y0 : y0 + int(bh), x0 : x0 + int(bw), 1] = 60
            img[y0 : y0 + int(bh), x0 : x0 + int(bw), 2] = 160
        return RenderedPage(image=img, links=list(self.anchors))


class FixtureBrowser:
    """Browser backed by an in-memory url -> FixturePage map."""

    def __init__(self, pages: dict[str, FixturePage]):
        self.pages = pages

    def navigate(self, url: str, timeout_s: float) -> RenderedPage:
        page = self.pages.get(url)
        if page is None:
            raise NavigationTimeout(f"no route to {url}")
        return page.render()


def _keep_link(url: str) -> bool:
    if not url or url.startswith("#") or url.startswith("javascript:"):
        return False
    return url.startswith(("http://", "https://", "/")) or "." in url.split("/")[0]


def capture_page(url: str, browser: Browser, timeout_s: float = 30.0) -> PageCapture:
    """Full-page capture resized to 320 px wide with a scaled click map."""
    try:
        page = browser.navigate(url, timeout_s)
    except NavigationTimeout:
        raise
    except Exception as e:
        raise CaptureFailed(str(e)) from e

    src_h, src_w = page.image.shape[:2]
    if src_w != CAPTURE_VIEWPORT[0]:
        raise CaptureFailed(f"expected {CAPTURE_VIEWPORT[0]}-px-wide capture, got {src_w}")
    scale = IMAGE_WIDTH / src_w
    new_h = max(1, round(src_h * scale))
    resized = np.asarray(
        Image.fromarray(page.image).resize((IMAGE_WIDTH, new_h), Image.LANCZOS)
    )
    truncated = new_h > MAX_IMAGE_HEIGHT
    if truncated:
        resized = resized[:MAX_IMAGE_HEIGHT]
        new_h = MAX_IMAGE_HEIGHT

    links = []
    for target, (x, y, w, h) in page.links:
        if not _keep_link(target) or w <= 0 or h <= 0:
            continue
        sx = math.floor(x * scale)
        sy = math.floor(y * scale)
        sw = math.ceil(w * scale)
        sh = math.ceil(h * scale)
        if sy >= new_h:
            continue
        sw = min(sw, IMAGE_WIDTH - sx)
        sh = min(sh, new_h - sy)
        if sw <= 0 or sh <= 0:
            continue
        links.append(ClickMapEntry(x=sx, y=sy, w=sw, h=sh, target_url=target))
    return PageCapture(image=resized, links=links, source_url=url, truncated=truncated)


def compress_strips(
    image: np.ndarray, quality: int = 10, strip_height: int = 64, codec: str = "webp"
) -> StripSet:
    """Compress an image into independently decodable horizontal bands."""
    h, w = image.shape[:2]
    if w != IMAGE_WIDTH:
        raise ValueError(f"image must be {IMAGE_WIDTH} px wide")
    if codec not in STRIP_CODECS:
        raise ValueError(f"unknown strip codec {codec!r}")
    sset = StripSet(strip_height=strip_height, width=w, height=h, codec=codec)
    fmt = codec.upper()
    for top in range(0, h, strip_height):
        band = image[top : top + strip_height]
        buf = io.BytesIO()
        Image.fromarray(band).save(buf, format=fmt, quality=quality)
        sset.strips.append(buf.getvalue())
    return sset


def decompress_strip(data: bytes, codec: str) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    return np.asarray(img.convert("RGB"))


def encode_strip_payload(sset: StripSet) -> bytes:
    """Self-delimiting strip records: STRP | index:u16 | codec:u8 | len:u32 | data."""
    out = bytearray()
    tag = STRIP_CODECS[sset.codec]
    for i, data in enumerate(sset.strips):
        out += STRIP_MAGIC
        out += struct.pack("<HBI", i, tag, len(data))
        out += data
    return bytes(out)


def decode_strip_payload(
    payload: bytes, missing: np.ndarray, height: int, strip_height: int
) -> tuple[np.ndarray, np.ndarray]:
    """Rebuild the raster from a (possibly damaged) strip payload.

    `missing` flags payload bytes zero-filled by reassembly.  A strip is
    usable only if its whole record arrived; damaged records mark their
    pixel band missing and the scanner resyncs on the next intact STRP
    magic.  Returns (image, per-pixel missing mask).
    """
    n_strips = -(-height // strip_height) if height else 0
    image = np.zeros((height, IMAGE_WIDTH, 3), dtype=np.uint8)
    mask = np.ones((height, IMAGE_WIDTH), dtype=bool)
    pos = 0
    head = struct.Struct("<HBI")
    n = len(payload)
    while pos + 4 + head.size <= n:
        if missing[pos : pos + 4].any() or payload[pos : pos + 4] != STRIP_MAGIC:
            nxt = _next_intact_magic(payload, missing, pos + 1)
            if nxt is None:
                break
            pos = nxt
            continue
        hdr_end = pos + 4 + head.size
        if missing[pos + 4 : hdr_end].any():
            nxt = _next_intact_magic(payload, missing, pos + 4)
            if nxt is None:
                break
            pos = nxt
            continue
        idx, tag, length = head.unpack(payload[pos + 4 : hdr_end])
        data_end = hdr_end + length
        if idx >= n_strips or tag not in STRIP_CODEC_NAMES or data_end > n:
            pos = pos + 4  # bogus header; rescan
            nxt = _next_intact_magic(payload, missing, pos)
            if nxt is None:
                break
            pos = nxt
            continue
        if not missing[hdr_end:data_end].any():
            try:
                band = decompress_strip(payload[hdr_end:data_end], STRIP_CODEC_NAMES[tag])
            except Exception:
                band = None
            if band is not None:
                top = idx * strip_height
                rows = min(band.shape[0], height - top)
                if rows > 0 and band.shape[1] == IMAGE_WIDTH:
                    image[top : top + rows] = band[:rows]
                    mask[top : top + rows] = False
        pos = data_end
    return image, mask


def _next_intact_magic(payload: bytes, missing: np.ndarray, start: int) -> int | None:
    pos = payload.find(STRIP_MAGIC, start)
    while pos != -1:
        if not missing[pos : pos + 4].any():
            return pos
        pos = payload.find(STRIP_MAGIC, pos + 1)
    return None


def score_link(entry: ClickMapEntry) -> float:
    """Click-likelihood priority: 0.68 * (w * h) - 0.32 * y.

    The integer area is formed first so the float evaluation order is
    fixed and scores are bit-reproducible across platforms.
    """
    return PUSH_WEIGHT_AREA * (entry.w * entry.h) - PUSH_WEIGHT_Y * entry.y


def select_push_links(links: list[ClickMapEntry], k: int = 3) -> list[ClickMapEntry]:
    """Top-k links by score; duplicates deduplicated, ties broken by
    smaller y then smaller x so the ranking is fully deterministic."""
    best: dict[str, ClickMapEntry] = {}
    for e in links:
        cur = best.get(e.target_url)
        if cur is None or _rank_key(e) < _rank_key(cur):
            best[e.target_url] = e
    ranked = sorted(best.values(), key=_rank_key)
    return ranked[:k]


def _rank_key(e: ClickMapEntry):
    return (-score_link(e), e.y, e.x)


class LlmEndpoint(Protocol):
    def complete(self, prompt: str) -> str: ...


class StubLlm:
    """Deterministic offline stand-in for a completion API."""

    def __init__(self, template: str = "Q: {prompt}\nA: This answer was generated offline."):
        self.template = template

    def complete(self, prompt: str) -> str:
        return self.template.format(prompt=prompt)


class HttpLlm:
    """Minimal chat-completions client (OpenAI-style JSON schema)."""

    def __init__(self, url: str, api_key: str = "", model: str = "gpt-4o-mini", timeout_s: float = 60.0):
        self.url = url
        self.api_key = api_key
        self.model = model
        self.timeout_s = timeout_s

    def complete(self, prompt: str) -> str:
        import json

        body = json.dumps(
            {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        ).encode()
        req = urllib.request.Request(
            self.url,
            data=body,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                payload = json.loads(resp.read())
        except Exception as e:
            raise LlmUnavailable(str(e)) from e
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as e:
            raise LlmUnavailable(f"malformed completion response: {e}") from e


def truncate_utf8(text: str, byte_cap: int) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) <= byte_cap:
        return raw
    # decode-with-ignore drops a trailing partial sequence but keeps a
    # complete final character
    return raw[:byte_cap].decode("utf-8", errors="ignore").encode("utf-8")


def render_llm(prompt: str, llm: LlmEndpoint, byte_cap: int = LLM_BYTE_CAP) -> bytes:
    """UTF-8 payload for an LLM request, truncated at a byte cap."""
    try:
        text = llm.complete(prompt)
    except LlmUnavailable:
        raise
    except Exception as e:
        raise LlmUnavailable(str(e)) from e
    return truncate_utf8(text, byte_cap)
