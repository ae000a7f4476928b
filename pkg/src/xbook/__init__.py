"""xBook: offline-first, schema-driven scientific databases.

Books are declarative database definitions (masks, fields, code tables,
migrations). Clients keep a full local store, work offline, and
synchronize per project with a central server over a compact binary
protocol carried by HTTP POST.
"""

__version__ = "0.1.0"
