"""
scANN 服务模块
通过 MCP 暴露训练、采样、留出实验与报告工具
"""

from .scann_service import ScannService

__all__ = ["ScannService"]
