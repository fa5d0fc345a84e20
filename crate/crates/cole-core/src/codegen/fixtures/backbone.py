class ReLUConvBN(nn.Module):
  def __init__(self, C_in, C_out, kernel_size, stride, padding, dilation):
    super(ReLUConvBN, self).__init__()
    self.op = nn.Sequential(
      nn.ReLU(inplace=False),
      nn.Conv2d(C_in, C_out, kernel_size, stride=stride, padding=padding, dilation=dilation, bias=False),
      nn.BatchNorm2d(C_out)
    )

  def forward(self, x):
    return self.op(x)

class ResNetBasicblock(nn.Module):
  def __init__(self, inplanes, planes, stride, affine=True):
    super(ResNetBasicblock, self).__init__()
    self.conv_a = ReLUConvBN(inplanes, planes, 3, stride, 1, 1)
    self.conv_b = ReLUConvBN(planes, planes, 3, 1, 1, 1)
    if stride == 2:
      self.downsample = nn.Sequential(
        nn.AvgPool2d(kernel_size=2, stride=2, padding=0),
        nn.Conv2d(inplanes, planes, kernel_size=1, stride=1, padding=0, bias=False)
      )
    elif inplanes != planes:
      self.downsample = ReLUConvBN(inplanes, planes, 1, 1, 0, 1)
    else:
      self.downsample = None

  def forward(self, inputs):
    basicblock = self.conv_a(inputs)
    basicblock = self.conv_b(basicblock)
    if self.downsample is not None:
      residual = self.downsample(inputs)
    else:
      residual = inputs
    return residual + basicblock

class Network(nn.Module):
  def __init__(self, channels, N, genotype, num_classes):
    super(Network, self).__init__()
    self.C = channels
    self.N = N
    self.stem = nn.Sequential(
      nn.Conv2d(3, self.C, kernel_size=3, padding=1, bias=False),
      nn.BatchNorm2d(self.C)
    )

    layer_channels = [self.C] * N + [self.C * 2] + [self.C * 2] * N + [self.C * 4] + [self.C * 4] * N
    layer_reductions = [False] * N + [True] + [False] * N + [True] + [False] * N

    C_prev = self.C
    self.cells = nn.ModuleList()
    for index, (C_curr, reduction) in enumerate(
      zip(layer_channels, layer_reductions)
    ):
      if reduction:
        cell = ResNetBasicblock(C_prev, C_curr, 2, True)
      else:
        cell = Cell(C_curr)
      self.cells.append(cell)
      C_prev = C_curr

    self._Layer = len(self.cells)
    self.lastact = nn.Sequential(nn.BatchNorm2d(C_prev), nn.ReLU(inplace=True))
    self.global_pooling = nn.AdaptiveAvgPool2d(1)
    self.classifier = nn.Linear(C_prev, num_classes)

  def get_training_config(self):
    optimizer = torch.optim.SGD(
      self.parameters(), lr=0.1, momentum=0.9,
      weight_decay=5e-4, nesterov=True
    )
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=200, eta_min=0)
    config = {
      'optimizer': optimizer, 'scheduler': scheduler,
      'batch_size': 256, 'epochs': 200
    }
    return config

  def forward(self, inputs):
    feature = self.stem(inputs)
    for i, cell in enumerate(self.cells):
      feature = cell(feature)
    out = self.lastact(feature)
    out = self.global_pooling(out)
    out = out.view(out.size(0), -1)
    logits = self.classifier(out)
    return out, logits
