#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
scANN MCP 主服务器
整合采样网络服务，提供本地 stdio MCP 入口
"""

import asyncio
import logging
from typing import Any, Dict, Optional

from fastmcp import FastMCP

from services.scann_service import ScannService


class ScannServer(FastMCP):
    """scANN 主服务器"""

    def __init__(self, name: str = "scann_main"):
        super().__init__(name=name)
        self.logger = logging.getLogger(__name__)
        self.scann_service: Optional[ScannService] = None
        self.logger.info("scANN 主服务器初始化: %s", name)

    async def setup_services(self):
        """创建并整合子服务"""
        try:
            self.scann_service = ScannService("scann_service")
            # 工具名前缀: scann_
            await self.import_server(prefix="scann", server=self.scann_service)
            self.logger.info("✓ scANN 服务已整合")
        except Exception as e:
            self.logger.error("设置子服务失败: %s", e)
            raise

    async def get_service_info(self) -> Dict[str, Any]:
        """获取主服务器信息"""
        tools = await self.get_tools()
        return {
            "name": self.name,
            "type": "main_server",
            "total_tools": len(tools),
            "tools": sorted(tools.keys()),
        }

    async def get_health_status(self) -> Dict[str, Any]:
        """获取服务健康状态"""
        health_status = {"main_server": "healthy", "services": {}}
        if self.scann_service is None:
            health_status["services"]["scann"] = "not_initialized"
            return health_status
        try:
            await self.scann_service.get_tools()
            health_status["services"]["scann"] = "healthy"
        except Exception as e:
            health_status["services"]["scann"] = f"unhealthy: {e}"
        return health_status


async def create_main_server(name: str = "scann_main") -> ScannServer:
    """创建并初始化主服务器"""
    server = ScannServer(name)
    await server.setup_services()
    return server


if __name__ == "__main__":

    async def setup_server():
        """异步设置服务器"""
        server = await create_main_server()
        logger = logging.getLogger(__name__)
        logger.info("主服务器启动成功: %s", await server.get_service_info())
        logger.info("健康状态: %s", await server.get_health_status())
        return server

    # 异步设置服务器，然后同步运行
    server = asyncio.run(setup_server())
    server.run()
