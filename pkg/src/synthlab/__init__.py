"""synthlab: class-conditional progressive GAN synthesis, feature-interpreter
mask generation, and a segmentation data-condition ablation harness."""

__version__ = "0.1.0"
