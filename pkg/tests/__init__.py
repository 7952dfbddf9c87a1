# statmap 单元测试包
