"""Visible-text extraction from fetched HTML pages."""

from __future__ import annotations

import re
from html.parser import HTMLParser

from attributor.backends.base import FetchedPage
from attributor.errors import FetchError, FetchTimeout, HttpError, NonHtmlContent

SKIP_TAGS = frozenset({"script", "style", "noscript", "nav", "header", "footer", "template", "svg", "head"})
BLOCK_TAGS = frozenset({
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl", "dt", "fieldset",
    "figcaption", "figure", "form", "h1", "h2", "h3", "h4", "h5", "h6", "hr", "li", "main",
    "ol", "p", "pre", "section", "table", "tbody", "td", "th", "thead", "tr", "ul",
})
VOID_TAGS = frozenset({"area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta",
                       "param", "source", "track", "wbr"})

_HSPACE = re.compile(r"[^\S\n]+")


class _TextCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.skip_depth = 0
        self.title: list[str] = []
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        if tag == "title":
            self._in_title = True
        if tag in SKIP_TAGS and tag not in VOID_TAGS:
            self.skip_depth += 1
        elif tag in BLOCK_TAGS:
            self.parts.append("\n")

    def handle_startendtag(self, tag, attrs):
        if tag in BLOCK_TAGS:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag == "title":
            self._in_title = False
        if tag in SKIP_TAGS and tag not in VOID_TAGS:
            self.skip_depth = max(0, self.skip_depth - 1)
        elif tag in BLOCK_TAGS:
            self.parts.append("\n")

    def handle_data(self, data):
        if self._in_title:
            self.title.append(data)
        if not self.skip_depth:
            self.parts.append(data)


def _truncate_utf8(text: str, max_bytes: int) -> str:
    encoded = text.encode("utf-8")
    if len(encoded) <= max_bytes:
        return text
    return encoded[:max_bytes].decode("utf-8", errors="ignore")


def extract_text(html: str, max_bytes: int | None = None) -> str:
    """Strip markup, drop script/style/nav-like subtrees, normalize whitespace.

    Block elements become line breaks; runs of spaces collapse; blank lines go.
    """
    parser = _TextCollector()
    parser.feed(html)
    parser.close()
    raw = "".join(parser.parts)
    lines = (_HSPACE.sub(" ", line).strip() for line in raw.split("\n"))
    text = "\n".join(line for line in lines if line)
    if max_bytes is not None:
        text = _truncate_utf8(text, max_bytes).rstrip()
    return text


def page_title(html: str) -> str:
    parser = _TextCollector()
    parser.feed(html)
    parser.close()
    return " ".join("".join(parser.title).split())


def _is_html(content_type: str) -> bool:
    ct = content_type.split(";", 1)[0].strip().lower()
    return ct in ("", "text/html", "application/xhtml+xml")


def fetch_and_extract(url: str, fetcher, max_page_bytes: int = 2_000_000) -> str:
    """Fetch one search-hit URL and return its visible text, capped at ``max_page_bytes``."""
    page: FetchedPage = fetcher.fetch(url)
    if page.timed_out:
        raise FetchTimeout(url)
    if page.error:
        raise FetchError(url, page.error)
    if not 200 <= page.status < 300:
        raise HttpError(url, page.status)
    if not _is_html(page.content_type):
        raise NonHtmlContent(url, page.content_type)
    return extract_text(page.body, max_page_bytes)
