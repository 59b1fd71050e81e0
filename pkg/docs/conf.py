# Sphinx configuration for the Zeros_Lab documentation.
#
# The API pages are generated by sphinx-apidoc at each build, from the
# bergman and zeros_lab packages under src/.

import os
import shutil
import sys
from datetime import datetime

__location__ = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(__location__, "../src"))

# -- Run sphinx-apidoc ------------------------------------------------------
# Read the Docs does not run sphinx-apidoc before sphinx-build
os.environ["SPHINX_APIDOC_OPTIONS"] = "members,undoc-members,show-inheritance"

from sphinx.ext import apidoc  # noqa: E402

output_dir = os.path.join(__location__, "api")
shutil.rmtree(output_dir, ignore_errors=True)
module_dir = os.path.join(__location__, "../src")
apidoc.main(["-f", "-o", output_dir, module_dir, os.path.join(module_dir, "schemas")])

# -- General configuration -----------------------------------------------------
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
]
source_suffix = ".rst"
master_doc = "index"
exclude_patterns = ["_build", "build", "dist"]
pygments_style = "sphinx"

project = "Zeros_Lab"
copyright = f"{datetime.now().year}, Zeros Lab developers"
try:
    from zeros_lab import __version__ as version
except ImportError:
    version = ""
release = version

# -- Options for HTML output ---------------------------------------------------
html_theme = "sphinx_rtd_theme"
htmlhelp_basename = "zeros_lab-doc"

# -- Options for LaTeX output --------------------------------------------------
latex_documents = [
    ("index", "user_guide.tex", "Zeros_Lab Documentation", "Zeros Lab developers", "manual"),
]

# -- External mapping ------------------------------------------------------------
intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "scipy": ("https://docs.scipy.org/doc/scipy", None),
}
