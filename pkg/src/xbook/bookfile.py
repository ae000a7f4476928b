"""Parser and writer for the declarative Book document.

A Book ships as a UTF-8 text document. The grammar is line based; blank
lines and `#` comments are ignored, indentation is not significant.

    book: <id>                      document header, exactly once
    name: <display name>
    schema_version: <int>

    mask: <Name>                    opens a mask block
    section: <Title>                groups the following fields
    field: <name> kind=<token> [mandatory] [min=N] [max=N] [max_len=N]

    codetable: <name> version=<int> opens a code table block
    code: <id> <lang>="<text>" ...

    migration: from=<int>           opens a migration block
    stmt: <op> <key=value ...>      bare keys are boolean flags

Kind tokens are canonical: text, number, decimal, flag, timestamp,
code:<table>, multicode:<table>, crosslink:<mask>. Quoted values use
backslash escapes for `\"` and `\\`.
"""

from __future__ import annotations

import re

from . import model
from .book import BookDescriptor, BookError, FieldDef, MaskDef, parse_kind_token

_LINE_RE = re.compile(r"(\w+):\s*(.*)")
_INT_RE = re.compile(r"-?\d+")


_ESCAPES = {"n": "\n", "r": "\r"}


def _split_tokens(rest: str, lineno: int) -> list[str]:
    """Split on whitespace, keeping quoted stretches intact."""
    tokens, buf, quoted, escape = [], [], False, False
    for ch in rest:
        if escape:
            buf.append(_ESCAPES.get(ch, ch))
            escape = False
        elif quoted and ch == "\\":
            escape = True
        elif ch == '"':
            quoted = not quoted
            buf.append(ch)
        elif ch.isspace() and not quoted:
            if buf:
                tokens.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
    if quoted or escape:
        raise BookError(f"line {lineno}: unterminated quote")
    if buf:
        tokens.append("".join(buf))
    return tokens


def _unquote(value: str, lineno: int) -> str:
    if value.startswith('"'):
        if not value.endswith('"') or len(value) < 2:
            raise BookError(f"line {lineno}: bad quoting in {value!r}")
        return value[1:-1]
    return value


def _coerce(value: str):
    if value == "true":
        return True
    if value == "false":
        return False
    if _INT_RE.fullmatch(value):
        return int(value)
    return value


def _parse_params(tokens: list[str], lineno: int) -> dict:
    """key=value tokens plus bare boolean flags."""
    params: dict = {}
    for tok in tokens:
        key, eq, value = tok.partition("=")
        if key in params:
            raise BookError(f"line {lineno}: duplicate parameter {key!r}")
        if not eq:
            params[key] = True
        else:
            raw = _unquote(value, lineno)
            params[key] = raw if value.startswith('"') else _coerce(raw)
    return params


class _MaskBuilder:
    def __init__(self, name: str):
        self.name = name
        self.fields: list[FieldDef] = []
        self.sections: list[tuple[str, list[str]]] = []

    def build(self) -> MaskDef:
        return MaskDef(self.name, tuple(self.fields),
                       tuple((t, tuple(fs)) for t, fs in self.sections))


def parse_book(text: str) -> BookDescriptor:
    book_id = book_name = None
    schema_version = None
    masks: list[_MaskBuilder] = []
    tables: list[model.CodeTable] = []
    migrations: list[tuple[int, list[model.Statement]]] = []
    block: object = None

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE_RE.fullmatch(line)
        if m is None:
            raise BookError(f"line {lineno}: expected 'key: ...', got {line!r}")
        keyword, rest = m.group(1), m.group(2).strip()

        if keyword == "book":
            if book_id is not None:
                raise BookError(f"line {lineno}: duplicate book header")
            book_id = rest
        elif keyword == "name":
            book_name = rest
        elif keyword == "schema_version":
            schema_version = int(rest)
        elif keyword == "mask":
            block = _MaskBuilder(rest)
            masks.append(block)
        elif keyword == "section":
            if not isinstance(block, _MaskBuilder):
                raise BookError(f"line {lineno}: section outside a mask")
            block.sections.append((rest, []))
        elif keyword == "field":
            if not isinstance(block, _MaskBuilder):
                raise BookError(f"line {lineno}: field outside a mask")
            tokens = _split_tokens(rest, lineno)
            if not tokens:
                raise BookError(f"line {lineno}: field needs a name")
            params = _parse_params(tokens[1:], lineno)
            kind_token = params.pop("kind", None)
            if not isinstance(kind_token, str):
                raise BookError(f"line {lineno}: field needs kind=<token>")
            kind, table, target = parse_kind_token(kind_token)
            try:
                fd = FieldDef(
                    name=tokens[0], kind=kind, table=table, target=target,
                    mandatory=bool(params.pop("mandatory", False)),
                    min_value=params.pop("min", None),
                    max_value=params.pop("max", None),
                    max_len=params.pop("max_len", None))
            except BookError as e:
                raise BookError(f"line {lineno}: {e}") from e
            if params:
                raise BookError(f"line {lineno}: unknown field parameters {sorted(params)}")
            block.fields.append(fd)
            if block.sections:
                block.sections[-1][1].append(fd.name)
        elif keyword == "codetable":
            tokens = _split_tokens(rest, lineno)
            if not tokens:
                raise BookError(f"line {lineno}: codetable needs a name")
            params = _parse_params(tokens[1:], lineno)
            version = params.pop("version", None)
            if not isinstance(version, int) or params:
                raise BookError(f"line {lineno}: codetable takes exactly version=<int>")
            block = model.CodeTable(tokens[0], version, {})
            tables.append(block)
        elif keyword == "code":
            if not isinstance(block, model.CodeTable):
                raise BookError(f"line {lineno}: code outside a codetable")
            tokens = _split_tokens(rest, lineno)
            if not tokens or not _INT_RE.fullmatch(tokens[0]):
                raise BookError(f"line {lineno}: code needs a numeric id")
            code_id = int(tokens[0])
            if code_id in block.rows:
                raise BookError(f"line {lineno}: duplicate code id {code_id}")
            texts = {}
            for tok in tokens[1:]:
                lang, eq, value = tok.partition("=")
                if not eq:
                    raise BookError(f"line {lineno}: code texts are lang=\"text\"")
                texts[lang] = _unquote(value, lineno)
            block.rows[code_id] = texts
        elif keyword == "migration":
            params = _parse_params(_split_tokens(rest, lineno), lineno)
            from_version = params.pop("from", None)
            if not isinstance(from_version, int) or params:
                raise BookError(f"line {lineno}: migration takes exactly from=<int>")
            block = (from_version, [])
            migrations.append(block)
        elif keyword == "stmt":
            if not (isinstance(block, tuple) and len(block) == 2):
                raise BookError(f"line {lineno}: stmt outside a migration")
            tokens = _split_tokens(rest, lineno)
            if not tokens:
                raise BookError(f"line {lineno}: stmt needs an operation")
            try:
                block[1].append(model.Statement(tokens[0], _parse_params(tokens[1:], lineno)))
            except model.ModelError as e:
                raise BookError(f"line {lineno}: {e}") from e
        else:
            raise BookError(f"line {lineno}: unknown directive {keyword!r}")

    if book_id is None or book_name is None or schema_version is None:
        raise BookError("document needs book:, name:, and schema_version:")
    mig = tuple(model.Migration(fv, tuple(stmts)) for fv, stmts in migrations)
    seen = set()
    for mg in mig:
        if mg.from_version in seen:
            raise BookError(f"duplicate migration from={mg.from_version}")
        seen.add(mg.from_version)
    return BookDescriptor(
        book_id=book_id, book_name=book_name, schema_version=schema_version,
        masks=tuple(mb.build() for mb in masks),
        code_tables=tuple(tables), migrations=mig)


def parse_migration_fragment(text: str) -> model.Migration:
    """Parse a standalone document holding exactly one migration block
    (the format of files fed to the server's add-migration command)."""
    from_version = None
    statements: list[model.Statement] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE_RE.fullmatch(line)
        if m is None:
            raise BookError(f"line {lineno}: expected 'key: ...', got {line!r}")
        keyword, rest = m.group(1), m.group(2).strip()
        if keyword == "migration":
            if from_version is not None:
                raise BookError(f"line {lineno}: only one migration per file")
            params = _parse_params(_split_tokens(rest, lineno), lineno)
            from_version = params.pop("from", None)
            if not isinstance(from_version, int) or params:
                raise BookError(f"line {lineno}: migration takes exactly from=<int>")
        elif keyword == "stmt":
            if from_version is None:
                raise BookError(f"line {lineno}: stmt before migration header")
            tokens = _split_tokens(rest, lineno)
            if not tokens:
                raise BookError(f"line {lineno}: stmt needs an operation")
            try:
                statements.append(model.Statement(tokens[0], _parse_params(tokens[1:], lineno)))
            except model.ModelError as e:
                raise BookError(f"line {lineno}: {e}") from e
        else:
            raise BookError(f"line {lineno}: unknown directive {keyword!r}")
    if from_version is None:
        raise BookError("file holds no migration")
    return model.Migration(from_version, tuple(statements))


# ---------------------------------------------------------------------------
# Writer
# ---------------------------------------------------------------------------


def _quote(value: str) -> str:
    escaped = (value.replace("\\", "\\\\").replace('"', '\\"')
               .replace("\n", "\\n").replace("\r", "\\r"))
    return f'"{escaped}"'


def _format_param(key: str, value) -> str:
    if value is True:
        return key
    if isinstance(value, bool) or isinstance(value, int):
        return f"{key}={str(value).lower() if isinstance(value, bool) else value}"
    text = str(value)
    # quote anything the reader would mistake for a number, a flag, or
    # token structure; quoted values are never coerced
    if re.search(r'[\s"\\=]', text) or text == "" or _INT_RE.fullmatch(text) \
            or text in ("true", "false"):
        return f"{key}={_quote(text)}"
    return f"{key}={text}"


def format_book(book: BookDescriptor) -> str:
    """Render a descriptor back to the document form parse_book accepts."""
    out = [f"book: {book.book_id}", f"name: {book.book_name}",
           f"schema_version: {book.schema_version}", ""]
    for mask in book.masks:
        out.append(f"mask: {mask.name}")
        section_of = {}
        for title, names in mask.sections:
            for n in names:
                section_of[n] = title
        started = set()
        for f in mask.fields:
            title = section_of.get(f.name)
            if title is not None and title not in started:
                out.append(f"section: {title}")
                started.add(title)
            parts = [f"field: {f.name}", f"kind={f.kind_token()}"]
            if f.mandatory:
                parts.append("mandatory")
            if f.min_value is not None:
                parts.append(f"min={f.min_value}")
            if f.max_value is not None:
                parts.append(f"max={f.max_value}")
            if f.max_len is not None:
                parts.append(f"max_len={f.max_len}")
            out.append(" ".join(parts))
        out.append("")
    for t in book.code_tables:
        out.append(f"codetable: {t.name} version={t.version}")
        for cid in sorted(t.rows):
            texts = " ".join(f"{lang}={_quote(text)}"
                             for lang, text in sorted(t.rows[cid].items()))
            out.append(f"code: {cid} {texts}".rstrip())
        out.append("")
    for mg in book.migrations:
        out.append(f"migration: from={mg.from_version}")
        for s in mg.statements:
            params = " ".join(_format_param(k, v) for k, v in s.params.items())
            out.append(f"stmt: {s.op} {params}".rstrip())
        out.append("")
    return "\n".join(out).rstrip() + "\n"
