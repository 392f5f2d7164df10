"""sketchlm: a tiny multimodal language model that draws sketches stroke by stroke."""

__version__ = "0.1.0"
