"""Book.xml: the launcher-side descriptor of one installable Book.

    <book>
      <applicationId>demofinds</applicationId>
      <applicationName>DemoFinds</applicationName>
      <description lang="en">Demo database of containers and finds</description>
      <description lang="de">Demo-Datenbank ...</description>
      <executeFile>bin/run</executeFile>
      <updateBaseUrl>https://example.org/books/demofinds</updateBaseUrl>
      <iconFile>icon.png</iconFile>
    </book>
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from urllib.parse import urlsplit


class BookXmlError(Exception):
    pass


@dataclass
class BookXml:
    application_id: str
    application_name: str
    execute_file: str
    update_base_url: str
    descriptions: dict[str, str] = field(default_factory=dict)
    icon_file: str | None = None

    def description(self, language: str) -> str:
        """Description in the launcher language, with English fallback."""
        if language in self.descriptions:
            return self.descriptions[language]
        if "en" in self.descriptions:
            return self.descriptions["en"]
        return next(iter(self.descriptions.values()), "")


def _relative(path: str, element: str) -> str:
    if path.startswith(("/", "\\")) or ".." in path.split("/"):
        raise BookXmlError(f"{element} must be a relative path without '..': {path!r}")
    return path


def parse_book_xml(document: str) -> BookXml:
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise BookXmlError(f"malformed Book.xml: {e}") from e
    if root.tag != "book":
        raise BookXmlError(f"root element must be <book>, got <{root.tag}>")

    def mandatory(name: str) -> str:
        node = root.find(name)
        if node is None or not (node.text or "").strip():
            raise BookXmlError(f"Book.xml misses mandatory element <{name}>")
        return node.text.strip()

    url = mandatory("updateBaseUrl")
    scheme = urlsplit(url).scheme
    if scheme not in ("http", "https"):
        raise BookXmlError(f"updateBaseUrl must be http(s), got {url!r}")

    descriptions = {}
    for node in root.findall("description"):
        lang = node.get("lang")
        if not lang:
            raise BookXmlError("description elements need a lang attribute")
        descriptions[lang] = (node.text or "").strip()

    icon = root.find("iconFile")
    return BookXml(
        application_id=mandatory("applicationId"),
        application_name=mandatory("applicationName"),
        execute_file=_relative(mandatory("executeFile"), "executeFile"),
        update_base_url=url.rstrip("/"),
        descriptions=descriptions,
        icon_file=_relative(icon.text.strip(), "iconFile")
        if icon is not None and (icon.text or "").strip() else None,
    )


def format_book_xml(book: BookXml) -> str:
    root = ET.Element("book")
    ET.SubElement(root, "applicationId").text = book.application_id
    ET.SubElement(root, "applicationName").text = book.application_name
    for lang in sorted(book.descriptions):
        node = ET.SubElement(root, "description", lang=lang)
        node.text = book.descriptions[lang]
    ET.SubElement(root, "executeFile").text = book.execute_file
    ET.SubElement(root, "updateBaseUrl").text = book.update_base_url
    if book.icon_file:
        ET.SubElement(root, "iconFile").text = book.icon_file
    return ET.tostring(root, encoding="unicode")
