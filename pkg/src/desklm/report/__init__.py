from .figures import figure_path, plot_loss_trace, plot_memory

__all__ = ["figure_path", "plot_loss_trace", "plot_memory"]
