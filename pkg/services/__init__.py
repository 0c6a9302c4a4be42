# 最大流、变换、核化、求解与实例生成服务
