"""Synthetic page corpora for benchmarks, demos, and the acceptance suite.

Pages follow conventional multi-panel layouts (horizontal bands, some split
into two columns with a gutter) and carry transcripts made of random
letter words, which are pairwise-distinctive under the reference embedder.
"""

from __future__ import annotations

import string

import numpy as np

from .annotations import FrameAnnotation, PageAnnotation, TextBoxAnnotation
from .detection_eval import Detection
from .geometry import Box

PAGE_WIDTH = 800
PAGE_HEIGHT = 1333
GUTTER = 16


def _random_line(rng: np.random.Generator) -> str:
    letters = list(string.ascii_lowercase)
    words = [
        "".join(rng.choice(letters, size=int(rng.integers(4, 9))))
        for _ in range(int(rng.integers(3, 7)))
    ]
    return " ".join(words)


def _page_frames(rng: np.random.Generator, page_index: int) -> list[FrameAnnotation]:
    n_bands = int(rng.integers(2, 5))
    boundaries = np.linspace(0, PAGE_HEIGHT, n_bands + 1)
    frames: list[FrameAnnotation] = []
    counter = 0
    for band in range(n_bands):
        top = float(boundaries[band]) + (GUTTER if band else 0)
        bottom = float(boundaries[band + 1])
        split = rng.random() < 0.5
        if split:
            middle = PAGE_WIDTH * float(rng.uniform(0.35, 0.65))
            columns = [(middle + GUTTER, PAGE_WIDTH), (0, middle)]  # right first visually
        else:
            columns = [(0, PAGE_WIDTH)]
        for left, right in columns:
            frames.append(
                FrameAnnotation(
                    id=f"f{page_index}_{counter}",
                    box=Box(left, top, right, bottom),
                )
            )
            counter += 1
    return frames


def _texts_for_frames(
    rng: np.random.Generator, page_index: int, frames: list[FrameAnnotation]
) -> list[TextBoxAnnotation]:
    texts: list[TextBoxAnnotation] = []
    counter = 0
    for frame in frames:
        for _ in range(int(rng.integers(1, 3))):
            box = frame.box
            width = min(140.0, box.width * 0.4)
            height = min(90.0, box.height * 0.4)
            x0 = float(rng.uniform(box.xmin, box.xmax - width))
            y0 = float(rng.uniform(box.ymin, box.ymax - height))
            texts.append(
                TextBoxAnnotation(
                    id=f"t{page_index}_{counter}",
                    box=Box(x0, y0, x0 + width, y0 + height),
                    text=_random_line(rng),
                )
            )
            counter += 1
    return texts


def synthetic_book(
    n_pages: int = 120, seed: int = 0, book_id: str = "synthetic"
) -> list[PageAnnotation]:
    """Generate a deterministic multi-panel book with transcripts."""
    rng = np.random.default_rng(seed)
    pages = []
    for page_index in range(n_pages):
        frames = _page_frames(rng, page_index)
        texts = _texts_for_frames(rng, page_index, frames)
        pages.append(
            PageAnnotation(
                book_id=book_id,
                page_index=page_index,
                width=PAGE_WIDTH,
                height=PAGE_HEIGHT,
                frames=tuple(frames),
                texts=tuple(texts),
            )
        )
    return pages


def synthetic_detections(
    pages: list[PageAnnotation], seed: int = 0, jitter: float = 0.08, miss_rate: float = 0.1
) -> list[Detection]:
    """Noisy detector output for a book: jittered ground truth plus misses.

    Useful for exercising the detection evaluator end to end without a model.
    """
    rng = np.random.default_rng(seed)
    detections: list[Detection] = []
    for page in pages:
        objects = [(1, f.box) for f in page.frames] + [(2, t.box) for t in page.texts]
        for label, box in objects:
            if rng.random() < miss_rate:
                continue
            dx0, dy0, dx1, dy1 = rng.uniform(-jitter, jitter, size=4)
            jittered = Box(
                max(0.0, box.xmin + dx0 * box.width),
                max(0.0, box.ymin + dy0 * box.height),
                min(float(page.width), box.xmax + dx1 * box.width),
                min(float(page.height), box.ymax + dy1 * box.height),
            )
            detections.append(
                Detection(
                    page_index=page.page_index,
                    label=label,
                    score=float(rng.uniform(0.4, 1.0)),
                    box=jittered,
                )
            )
    return detections
