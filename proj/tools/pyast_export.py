#!/usr/bin/env python3
# Copyright 2026 The codematch Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Exports snippet trees from CPython's `ast` module in codematch's tree schema.

Output is the pre-parsed tree file consumed by `codematch sbt --backend file`:
  [{"id": int, "tree": {"type": str, "value": str|null, "children": [...]}|null}]
A null tree marks a snippet CPython cannot parse.

Node mapping (shared with the embedded parser):
  * expression-mode parse first (root "Expression"), then statement mode
    (root "Module");
  * expression contexts, type comments and integer flags are dropped;
  * Name -> leaf "Name" valued with the identifier;
  * Constant -> leaf "Num" / "Str" / "Bytes" valued with the literal's source
    text, "NameConstant" valued "True"/"False"/"None", or bare "Ellipsis";
  * JoinedStr (f-strings) -> leaf valued with its source text;
  * string-valued fields (attr, name, arg, module, asname, names) -> leaf
    "Identifier" valued with the string;
  * every other node -> its class name, children in _fields order, None
    entries skipped.
Whitespace inside values is replaced with U+2423.
"""

import argparse
import ast
import json
import sys

SPACES = {" ", "\t", "\n", "\r", "\f", "\v", " ", "　"}
SKIP_FIELDS = {"ctx", "type_comment", "kind", "simple", "level", "is_async", "type_ignores", "conversion"}


def sanitize(text):
    return "".join("␣" if c in SPACES else c for c in text)


def leaf(node_type, value=None):
    return {"type": node_type, "value": None if value is None else sanitize(value), "children": []}


def convert(node, source):
    if isinstance(node, ast.Name):
        return leaf("Name", node.id)
    if isinstance(node, ast.Constant):
        v = node.value
        if v is Ellipsis:
            return leaf("Ellipsis")
        if v is None or isinstance(v, bool):
            return leaf("NameConstant", repr(v))
        seg = ast.get_source_segment(source, node)
        if isinstance(v, str):
            return leaf("Str", seg)
        if isinstance(v, bytes):
            return leaf("Bytes", seg)
        return leaf("Num", seg)
    if isinstance(node, ast.JoinedStr):
        return leaf("JoinedStr", ast.get_source_segment(source, node))
    children = []
    for field in node._fields:
        if field in SKIP_FIELDS:
            continue
        value = getattr(node, field, None)
        items = value if isinstance(value, list) else [value]
        for item in items:
            if item is None or isinstance(item, ast.expr_context):
                continue
            if isinstance(item, ast.AST):
                children.append(convert(item, source))
            elif isinstance(item, str):
                children.append(leaf("Identifier", item))
    return {"type": type(node).__name__, "value": None, "children": children}


def parse_snippet(code):
    for mode in ("eval", "exec"):
        try:
            return convert(ast.parse(code, mode=mode), code)
        except (SyntaxError, ValueError):
            continue
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--in", dest="inp", required=True,
                    help="CoNaLa-format JSON array, or a JSON array of plain snippet strings")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()
    with open(args.inp, encoding="utf-8") as f:
        records = json.load(f)
    out = []
    for i, rec in enumerate(records):
        code = rec if isinstance(rec, str) else rec["snippet"]
        out.append({"id": i, "tree": parse_snippet(code)})
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(out, f, ensure_ascii=False, indent=1)
        f.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
