"""CoNLL-2012-style key/response files for third-party cross-checks.

One token per line with tab-separated columns

    doc_id  token_index  token_text  coref

inside `#begin document (<doc_id>);` / `#end document` blocks, sentences
separated by blank lines. The coref column uses the usual bracket notation:
`(3` opens cluster 3 at this token, `3)` closes it, `(3)` is a single-token
mention, multiple items join with `|`, and `-` means no mention boundary.

Nested mentions round-trip; properly crossing mentions of the same cluster
do not (the bracket notation cannot distinguish them) and are rejected at
write time.
"""

from __future__ import annotations

from pathlib import Path

from .corpus import Document

MentionKey = tuple[str, int, int]


def write_conll(path: str | Path, documents: list[Document],
                clusters: list[set]) -> None:
    """Write a partition over (doc_id, start, end) mentions as CoNLL text."""
    by_doc: dict[str, list[tuple[int, int, int]]] = {}
    known = {d.doc_id for d in documents}
    for cid, cluster in enumerate(clusters):
        for doc_id, start, end in cluster:
            if doc_id not in known:
                raise ValueError(f"mention references unknown document {doc_id!r}")
            by_doc.setdefault(doc_id, []).append((start, end, cid))
    lines: list[str] = []
    for doc in documents:
        spans = by_doc.get(doc.doc_id, [])
        _check_no_crossing(spans, doc.doc_id)
        opens: dict[int, list[tuple[int, int]]] = {}
        closes: dict[int, list[tuple[int, int]]] = {}
        singles: dict[int, list[int]] = {}
        for start, end, cid in spans:
            if start == end:
                singles.setdefault(start, []).append(cid)
            else:
                opens.setdefault(start, []).append((end, cid))
                closes.setdefault(end, []).append((start, cid))
        lines.append(f"#begin document ({doc.doc_id});")
        for s_start, s_end in doc.sentence_spans:
            for t in range(s_start, s_end + 1):
                parts = []
                # outermost opens first; innermost closes first
                for end, cid in sorted(opens.get(t, []), key=lambda x: (-x[0], x[1])):
                    parts.append(f"({cid}")
                for cid in sorted(singles.get(t, [])):
                    parts.append(f"({cid})")
                for start, cid in sorted(closes.get(t, []), key=lambda x: (-x[0], x[1])):
                    parts.append(f"{cid})")
                coref = "|".join(parts) if parts else "-"
                lines.append(f"{doc.doc_id}\t{t}\t{doc.tokens[t].text}\t{coref}")
            lines.append("")
        lines.append("#end document")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _check_no_crossing(spans: list[tuple[int, int, int]], doc_id: str) -> None:
    for i, (s1, e1, _) in enumerate(spans):
        for s2, e2, _ in spans[i + 1:]:
            if s1 < s2 <= e1 < e2 or s2 < s1 <= e2 < e1:
                raise ValueError(
                    f"crossing mentions ({s1},{e1}) and ({s2},{e2}) in "
                    f"{doc_id!r} cannot be written as CoNLL brackets")


def read_conll(path: str | Path) -> list[set]:
    """Parse a CoNLL file back into a partition; cluster order by id."""
    clusters: dict[int, set] = {}
    open_stacks: dict[tuple[str, int], list[int]] = {}
    doc_id = None
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.rstrip()
        if not line:
            continue
        if line.startswith("#begin document"):
            lparen = line.index("(")
            rparen = line.rindex(")")
            doc_id = line[lparen + 1:rparen]
            continue
        if line.startswith("#end document"):
            for (d, cid), stack in open_stacks.items():
                if stack:
                    raise ValueError(f"unclosed mention of cluster {cid} in {d!r}")
            doc_id = None
            continue
        if doc_id is None:
            raise ValueError(f"token line outside a document block: {line!r}")
        cols = line.split("\t")
        if len(cols) != 4:
            raise ValueError(f"expected 4 columns, got {len(cols)}: {line!r}")
        t = int(cols[1])
        coref = cols[3]
        if coref == "-":
            continue
        for item in coref.split("|"):
            if item.startswith("(") and item.endswith(")"):
                cid = int(item[1:-1])
                clusters.setdefault(cid, set()).add((doc_id, t, t))
            elif item.startswith("("):
                cid = int(item[1:])
                open_stacks.setdefault((doc_id, cid), []).append(t)
            elif item.endswith(")"):
                cid = int(item[:-1])
                stack = open_stacks.get((doc_id, cid))
                if not stack:
                    raise ValueError(f"close without open for cluster {cid} at {line!r}")
                start = stack.pop()
                clusters.setdefault(cid, set()).add((doc_id, start, t))
            else:
                raise ValueError(f"malformed coref item {item!r}")
    return [clusters[cid] for cid in sorted(clusters)]
