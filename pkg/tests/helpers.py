"""Small builders shared across test modules."""

from __future__ import annotations

from receipt_kie.model import BBox, Document, EntityLabel, LabelSource, Token

PAGE_W, PAGE_H = 600, 400
TOKEN_H = 20


def norm_box(x0: int, y0: int, x1: int, y1: int, page=(PAGE_W, PAGE_H)) -> BBox:
    w, h = page
    return BBox(x0 / w, y0 / h, x1 / w, y1 / h)


def make_token(
    token_id: int,
    text: str,
    x0: int,
    y0: int,
    *,
    width: int | None = None,
    height: int = TOKEN_H,
    label: EntityLabel = EntityLabel.UNTAGGED,
    source: LabelSource | None = None,
    page=(PAGE_W, PAGE_H),
) -> Token:
    width = width if width is not None else 10 * len(text)
    if label is not EntityLabel.UNTAGGED and source is None:
        source = LabelSource.MODEL
    return Token(
        token_id=token_id,
        text=text,
        bbox=norm_box(x0, y0, x0 + width, y0 + height, page),
        label=label,
        source=source,
    )


def make_doc(tokens, doc_id: str = "doc-1", page=(PAGE_W, PAGE_H)) -> Document:
    return Document(
        doc_id=doc_id, tokens=tuple(tokens), page_width=page[0], page_height=page[1]
    )
