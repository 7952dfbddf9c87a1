"""
statmap：统计流形之间映射的变分数值库

主要功能：
- 坐标卡上的统计流形（度量、α-联络、对偶、曲率）
- 周期网格上的能量、张力场与双能量
- 第一/第二变分公式的有限差分校验与调和映射流
- Jacobi 算子的稠密谱、指标、零度与稳定性判定
- 场景文件驱动的批量运行与报告
"""

__version__ = "1.0.0"
