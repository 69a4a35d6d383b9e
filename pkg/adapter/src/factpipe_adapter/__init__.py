"""factpipe-model-adapter: edit microservice speaking the factpipe edit
wire protocol over pretrained diffusion editing pipelines."""

__version__ = "0.1.0"
