# 实例、证书、求解结果与树分解模型
