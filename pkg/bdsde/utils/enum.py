import six


class EnumValue(object):
    def __init__(self, value, name=None, description=None):
        self.value = value
        self.name = name
        self.description = description

    def __hash__(self):
        return hash(self.value)

    def __eq__(self, other):
        if isinstance(other, EnumValue):
            return self.value == other.value
        return self.value == other

    def __ne__(self, other):
        return not self.__eq__(other)

    def __str__(self):
        return self.name

    def __repr__(self):
        return '{}({!r})'.format(self.name, self.value)


class EnumMeta(type):
    def __init__(self, name, bases, dict_):
        self.registry = self.registry.copy()
        self.name_registry = self.name_registry.copy()
        for k, v in six.iteritems(dict_):
            if isinstance(v, EnumValue) and v.value not in self.registry:
                if v.name is None:
                    v.name = k
                self.registry[v.value] = v
                self.name_registry[v.name] = v
        super(EnumMeta, self).__init__(name, bases, dict_)

    def __iter__(self):
        return iter(sorted(self.registry.values(), key=lambda v: v.name))

    def __contains__(self, key):
        return key in self.registry or key in self.name_registry

    def __getitem__(self, key):
        return self.registry[key]


class Enum(six.with_metaclass(EnumMeta, object)):
    """Closed set of named values.

    Members are declared as `EnumValue` class attributes; lookups go through
    `from_id` (by value) or `from_string` (by attribute name, case-insensitive,
    dashes accepted for underscores, the spelling used on the command line).
    """
    registry = {}
    name_registry = {}

    @classmethod
    def from_id(cls, value):
        if isinstance(value, EnumValue):
            value = value.value
        try:
            return cls.registry[value]
        except KeyError:
            raise ValueError('Invalid value for {}: {}'.format(cls.__name__, value))

    @classmethod
    def from_string(cls, name):
        if isinstance(name, EnumValue):
            return cls.from_id(name.value)
        key = six.text_type(name).strip().upper().replace('-', '_')
        try:
            return cls.name_registry[key]
        except KeyError:
            raise ValueError('Invalid name for {}: {}. Expected one of: {}'.format(
                cls.__name__, name, ', '.join(cls.names())))

    @classmethod
    def names(cls):
        return sorted(cls.name_registry)
