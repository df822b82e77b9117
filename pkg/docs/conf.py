import os
import sys
sys.path.insert(0, os.path.abspath('..'))

project = 'psmm-sim'
extensions = ['sphinx.ext.autodoc']
exclude_patterns = ['_build']
html_theme = 'alabaster'
