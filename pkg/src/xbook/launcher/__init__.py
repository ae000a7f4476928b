"""Install, update, configure, and run Books from Book.xml descriptors."""

from .bookxml import BookXml, BookXmlError, parse_book_xml  # noqa: F401
from .manifest import Manifest, ManifestError, parse_manifest  # noqa: F401
from .settings import Settings, load_settings, save_settings  # noqa: F401
from .update import Action, PlanItem, UpdateError, apply_update, plan_update  # noqa: F401
