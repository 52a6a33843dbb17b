"""Cross-checks site25.expected.json with a stdlib-only breadth-first crawl.

Run from this directory: python3 check_site25.py
"""
import json
import sys
from collections import deque
from html.parser import HTMLParser
from urllib.parse import urldefrag, urljoin, urlparse

ROOT = "site25/"
HOST = "crm.example"


class Page(HTMLParser):
    def __init__(self):
        super().__init__()
        self.items = []
        self.form = None
        self.cur = None
        self.menu = 0
        self.title = ""
        self.in_title = False

    def handle_starttag(self, tag, attrs):
        a = dict(attrs)
        if a.get("role") == "menubar":
            self.menu += 1
        if tag == "title":
            self.in_title = True
        if tag == "form":
            self.form = a.get("action")
        if tag == "a" and "href" in a:
            self.cur = ["a", a, ""]
        if tag == "button":
            self.cur = ["button", a, ""]
        if tag == "input" and a.get("type") in ("submit", "button"):
            submit = a.get("type") == "submit" and self.form
            self.items.append(("form" if submit else "button", a.get("value"), self.form if submit else None))

    def handle_data(self, data):
        if self.cur:
            self.cur[2] += data
        if self.in_title:
            self.title += data

    def handle_endtag(self, tag):
        if tag == "title":
            self.in_title = False
        if tag == "nav":
            self.menu = 0
        if tag == "form":
            self.form = None
        if self.cur and tag == self.cur[0]:
            kind, a, text = self.cur
            text = " ".join(text.split())
            if kind == "a":
                self.items.append(("menu" if self.menu else "link", text, a["href"]))
            elif a.get("type", "submit") == "submit" and self.form:
                self.items.append(("form", text, self.form))
            else:
                self.items.append(("button", text, None))
            self.cur = None


def load(url):
    p = Page()
    with open(ROOT + urlparse(url).path.lstrip("/")) as f:
        p.feed(f.read())
    return p


def main():
    home = f"https://{HOST}/home.html"
    ids = {home: 0}
    queue = deque([home])
    edges, loops, names, external = [], [], {}, 0
    while queue:
        u = queue.popleft()
        page = load(u)
        names[ids[u]] = page.title
        for kind, label, href in page.items:
            if href is None:
                loops.append([ids[u], ids[u], label, "button"])
                continue
            t = urldefrag(urljoin(u, href))[0]
            parsed = urlparse(t)
            if parsed.scheme not in ("http", "https") or parsed.hostname != HOST:
                external += 1
                continue
            if t not in ids:
                ids[t] = len(ids)
                queue.append(t)
            edges.append([ids[u], ids[t], label, kind])
    with open("site25.expected.json") as f:
        expected = json.load(f)
    nodes = [[i, u.split(HOST + "/")[1], names[i]] for u, i in sorted(ids.items(), key=lambda p: p[1])]
    ok = nodes == expected["nodes"] and edges + loops == expected["edges"] and external == expected["external_ignored"]
    print(f"nodes={len(nodes)} edges={len(edges) + len(loops)} external={external} match={ok}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
